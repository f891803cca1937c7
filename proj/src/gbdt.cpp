/*
 * Copyright 2026 The Steward Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "steward/gbdt.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <random>

#include "steward/parallel.hpp"

namespace steward {

void TrainConfig::validate() const {
  if (num_trees < 1) throw ConfigError("num_trees must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ConfigError("learning_rate must lie in (0, 1]");
  }
  if (num_leaves < 2) throw ConfigError("num_leaves must be >= 2");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
  if (max_bins < 2 || max_bins > 255) throw ConfigError("max_bins must lie in [2, 255]");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) {
    throw ConfigError("feature_fraction must lie in (0, 1]");
  }
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return {{"num_trees", num_trees},
          {"learning_rate", learning_rate},
          {"num_leaves", num_leaves},
          {"min_samples_leaf", min_samples_leaf},
          {"l2_lambda", l2_lambda},
          {"max_bins", max_bins},
          {"feature_fraction", feature_fraction},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.num_trees = j.value("num_trees", c.num_trees);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.num_leaves = j.value("num_leaves", c.num_leaves);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
  c.max_bins = j.value("max_bins", c.max_bins);
  c.feature_fraction = j.value("feature_fraction", c.feature_fraction);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

int bin_of(const std::vector<double>& edges, double x) {
  if (std::isnan(x)) return 0;
  return 1 + static_cast<int>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
}

namespace {

double midpoint(double a, double b) {
  double m = a / 2 + b / 2;
  if (!(m < b) || m < a) m = a;
  return m;
}

double threshold_of(const std::vector<double>& edges, int bin) {
  return static_cast<std::size_t>(bin) <= edges.size() ? edges[static_cast<std::size_t>(bin) - 1]
                                                       : std::numeric_limits<double>::infinity();
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::vector<double> compute_bin_edges(std::vector<double> values, int max_bins) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  std::vector<std::size_t> upto;  // rows with value <= distinct[i]
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (distinct.empty() || values[i] != distinct.back()) {
      distinct.push_back(values[i]);
      upto.push_back(0);
    }
    upto.back() = i + 1;
  }
  std::vector<double> edges;
  if (distinct.size() <= 1) return edges;
  if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
      edges.push_back(midpoint(distinct[i], distinct[i + 1]));
    }
    return edges;
  }
  const double m = static_cast<double>(values.size());
  std::size_t i = 0;
  for (int j = 1; j < max_bins; ++j) {
    const double target = m * j / max_bins;
    while (i + 1 < distinct.size() && static_cast<double>(upto[i]) < target) ++i;
    if (i + 1 >= distinct.size()) break;
    const double e = midpoint(distinct[i], distinct[i + 1]);
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda) {
  const double g = g_left + g_right;
  const double h = h_left + h_right;
  return 0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) -
                g * g / (h + lambda));
}

double logistic_loss(const Eigen::VectorXd& raw, const Eigen::VectorXd& labels,
                     const std::vector<bool>& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    sum += softplus(raw(i)) - labels(i) * raw(i);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

namespace {

struct BinStat {
  double g = 0.0;
  double h = 0.0;
  std::int64_t n = 0;

  BinStat& operator+=(const BinStat& o) {
    g += o.g;
    h += o.h;
    n += o.n;
    return *this;
  }
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  int bin = 0;
  bool default_left = false;
  BinStat left;
  BinStat right;
};

struct Leaf {
  std::vector<std::uint32_t> rows;  // ascending positions in the training subset
  BinStat total;
  std::vector<BinStat> hist;
  Candidate best;
  int node = 0;
};

class Grower {
 public:
  Grower(const std::vector<std::uint8_t>& bins, std::size_t n_rows,
         const std::vector<std::vector<double>>& edges, const TrainConfig& config)
      : bins_(bins), n_rows_(n_rows), edges_(edges), config_(config) {
    std::size_t off = 0;
    for (const auto& e : edges_) {
      offset_.push_back(off);
      width_.push_back(e.size() + 2);
      off += e.size() + 2;
    }
    hist_size_ = off;
  }

  // Grows one tree on gradients g, h over the selected features and adds
  // its leaf outputs to `raw`.
  Tree grow(const std::vector<double>& g, const std::vector<double>& h,
            const std::vector<int>& features, std::vector<double>& raw) {
    g_ = &g;
    h_ = &h;
    features_ = &features;
    Tree tree;
    tree.nodes.emplace_back();

    std::vector<Leaf> leaves(1);
    Leaf& root = leaves[0];
    root.rows.resize(n_rows_);
    for (std::size_t i = 0; i < n_rows_; ++i) {
      root.rows[i] = static_cast<std::uint32_t>(i);
      root.total += BinStat{g[i], h[i], 1};
    }
    build_histogram(root);
    find_best(root);

    while (static_cast<int>(leaves.size()) < config_.num_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best.feature < 0) continue;
        if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      const Candidate& c = parent.best;
      const auto f = static_cast<std::size_t>(c.feature);
      Leaf left, right;
      left.total = c.left;
      right.total = c.right;
      const std::uint8_t* col = bins_.data() + f * n_rows_;
      for (std::uint32_t r : parent.rows) {
        const int b = col[r];
        const bool go_left = b == 0 ? c.default_left : b <= c.bin;
        (go_left ? left.rows : right.rows).push_back(r);
      }

      TreeNode& node = tree.nodes[static_cast<std::size_t>(parent.node)];
      node.feature = c.feature;
      node.bin = c.bin;
      node.threshold = threshold_of(edges_[f], c.bin);
      node.default_left = c.default_left;
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      left.node = node.left;
      right.node = node.right;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
      Leaf& large = &small == &left ? right : left;
      build_histogram(small);
      large.hist = std::move(parent.hist);
      for (int feature : features) {
        const std::size_t o = offset_[static_cast<std::size_t>(feature)];
        for (std::size_t b = 0; b < width_[static_cast<std::size_t>(feature)]; ++b) {
          large.hist[o + b].g -= small.hist[o + b].g;
          large.hist[o + b].h -= small.hist[o + b].h;
          large.hist[o + b].n -= small.hist[o + b].n;
        }
      }
      find_best(left);
      find_best(right);
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }

    for (const Leaf& leaf : leaves) {
      const double value =
          -leaf.total.g / (leaf.total.h + config_.l2_lambda) * config_.learning_rate;
      tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
      for (std::uint32_t r : leaf.rows) raw[r] += value;
    }
    return tree;
  }

 private:
  void build_histogram(Leaf& leaf) const {
    leaf.hist.assign(hist_size_, BinStat{});
    const auto& features = *features_;
    parallel_for(features.size(), config_.threads, [&](std::size_t k) {
      const auto f = static_cast<std::size_t>(features[k]);
      BinStat* block = leaf.hist.data() + offset_[f];
      const std::uint8_t* col = bins_.data() + f * n_rows_;
      for (std::uint32_t r : leaf.rows) {
        BinStat& s = block[col[r]];
        s.g += (*g_)[r];
        s.h += (*h_)[r];
        ++s.n;
      }
    });
  }

  void find_best(Leaf& leaf) const {
    Candidate best;
    const std::int64_t min_leaf = config_.min_samples_leaf;
    if (leaf.total.n < 2 * min_leaf) {
      leaf.best = best;
      return;
    }
    const double lambda = config_.l2_lambda;
    for (int feature : *features_) {
      const auto f = static_cast<std::size_t>(feature);
      const BinStat* block = leaf.hist.data() + offset_[f];
      const int k = static_cast<int>(width_[f]) - 1;
      const BinStat missing = block[0];
      BinStat cum;
      for (int b = 1; b <= k; ++b) {
        cum += block[b];
        for (int side = 0; side < 2; ++side) {
          bool default_left = side == 0;
          if (missing.n == 0 && side == 1) break;
          BinStat left = cum;
          if (missing.n > 0 && default_left) left += missing;
          const BinStat right{leaf.total.g - left.g, leaf.total.h - left.h,
                              leaf.total.n - left.n};
          if (left.n < min_leaf || right.n < min_leaf) continue;
          const double gain = split_gain(left.g, left.h, right.g, right.h, lambda);
          if (gain > best.gain) {
            // Without missing rows here, unseen NaNs follow the larger side.
            if (missing.n == 0) default_left = left.n >= right.n;
            best = Candidate{gain, feature, b, default_left, left, right};
          }
        }
      }
    }
    leaf.best = best;
  }

  const std::vector<std::uint8_t>& bins_;
  std::size_t n_rows_;
  const std::vector<std::vector<double>>& edges_;
  const TrainConfig& config_;
  std::vector<std::size_t> offset_;
  std::vector<std::size_t> width_;
  std::size_t hist_size_ = 0;
  const std::vector<double>* g_ = nullptr;
  const std::vector<double>* h_ = nullptr;
  const std::vector<int>* features_ = nullptr;
};

}  // namespace

ForestModel fit_forest(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                       const std::vector<bool>& mask, const TrainConfig& config) {
  config.validate();
  if (labels.size() != features.rows() || mask.size() != static_cast<std::size_t>(features.rows())) {
    throw Error("features, labels and mask must have the same row count");
  }
  std::vector<Eigen::Index> rows;
  std::size_t positives = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double y = labels(i);
    if (y != 0.0 && y != 1.0) throw Error("labels must be 0 or 1");
    rows.push_back(i);
    positives += y == 1.0;
  }
  if (rows.empty()) throw Error("no rows selected for training");
  if (positives == 0 || positives == rows.size()) {
    throw SingleClassError("training labels contain a single class (" +
                           std::to_string(positives) + " positive of " +
                           std::to_string(rows.size()) + "); skip this target");
  }
  const std::size_t n = rows.size();
  const auto n_features = static_cast<std::size_t>(features.cols());

  ForestModel model;
  model.config = config;
  model.n_features = static_cast<int>(n_features);
  model.bin_edges.resize(n_features);
  std::vector<std::uint8_t> bins(n_features * n);
  parallel_for(n_features, config.threads, [&](std::size_t f) {
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = features(rows[i], static_cast<Eigen::Index>(f));
    }
    model.bin_edges[f] = compute_bin_edges(column, config.max_bins);
    for (std::size_t i = 0; i < n; ++i) {
      bins[f * n + i] = static_cast<std::uint8_t>(bin_of(model.bin_edges[f], column[i]));
    }
  });

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = labels(rows[i]);
  const double rate = static_cast<double>(positives) / static_cast<double>(n);
  model.base_score = std::log(rate / (1.0 - rate));

  std::vector<double> raw(n, model.base_score);
  std::vector<double> g(n), h(n);
  const std::vector<bool> all(n, true);
  auto loss = [&] {
    return logistic_loss(Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(n)),
                         y, all);
  };
  model.loss_history.push_back(loss());

  std::vector<int> feature_ids(n_features);
  for (std::size_t f = 0; f < n_features; ++f) feature_ids[f] = static_cast<int>(f);
  const std::size_t per_tree = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.feature_fraction * static_cast<double>(n_features))));

  Grower grower(bins, n, model.bin_edges, config);
  for (int t = 0; t < config.num_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-raw[i]));
      g[i] = p - y(static_cast<Eigen::Index>(i));
      h[i] = p * (1.0 - p);
    }
    std::vector<int> chosen = feature_ids;
    if (per_tree < n_features) {
      std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(t)));
      for (std::size_t i = 0; i < per_tree; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (n_features - i));
        std::swap(chosen[i], chosen[j]);
      }
      chosen.resize(per_tree);
      std::sort(chosen.begin(), chosen.end());
    }
    model.trees.push_back(grower.grow(g, h, chosen, raw));
    model.loss_history.push_back(loss());
  }
  return model;
}

nlohmann::ordered_json ForestModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "steward-forest";
  j["version"] = 1;
  j["config"] = config.to_json();
  j["base_score"] = base_score;
  j["n_features"] = n_features;
  j["bin_edges"] = bin_edges;
  nlohmann::ordered_json trees_json = nlohmann::ordered_json::array();
  for (const Tree& t : trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.feature < 0) {
        nodes.push_back({{"leaf", n.value}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"bin", n.bin},
                         {"default_left", n.default_left},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    trees_json.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees_json);
  j["loss_history"] = loss_history;
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "steward-forest") throw Error("not a forest model");
    ForestModel m;
    m.config = TrainConfig::from_json(j.at("config"));
    m.base_score = j.at("base_score").get<double>();
    m.n_features = j.at("n_features").get<int>();
    m.bin_edges = j.at("bin_edges").get<std::vector<std::vector<double>>>();
    if (m.bin_edges.size() != static_cast<std::size_t>(m.n_features)) {
      throw Error("bin_edges does not match n_features");
    }
    for (const auto& tj : j.at("trees")) {
      Tree t;
      for (const auto& nj : tj.at("nodes")) {
        TreeNode n;
        if (nj.contains("leaf")) {
          n.value = nj.at("leaf").get<double>();
        } else {
          n.feature = nj.at("feature").get<int>();
          n.bin = nj.at("bin").get<int>();
          n.default_left = nj.at("default_left").get<bool>();
          n.left = nj.at("left").get<int>();
          n.right = nj.at("right").get<int>();
          if (n.feature < 0 || n.feature >= m.n_features || n.bin < 1) {
            throw Error("node references an invalid feature or bin");
          }
          n.threshold = threshold_of(m.bin_edges[static_cast<std::size_t>(n.feature)], n.bin);
        }
        t.nodes.push_back(n);
      }
      for (const TreeNode& n : t.nodes) {
        const auto size = static_cast<int>(t.nodes.size());
        if (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
          throw Error("node child index out of range");
        }
      }
      if (t.nodes.empty()) throw Error("empty tree");
      m.trees.push_back(std::move(t));
    }
    m.loss_history = j.value("loss_history", std::vector<double>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed forest model: ") + e.what());
  }
}

nlohmann::ordered_json MultilabelModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "steward-multilabel";
  j["version"] = 1;
  nlohmann::ordered_json models_json = nlohmann::ordered_json::object();
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::object();
  nlohmann::ordered_json masks_json = nlohmann::ordered_json::object();
  for (const auto& [a, m] : models) {
    const std::string name(antibiotic_name(a));
    models_json[name] = m.to_json();
    const auto& mask = train_masks.at(a);
    rows_json[name] = std::count(mask.begin(), mask.end(), true);
    std::string bits;
    for (bool b : mask) bits.push_back(b ? '1' : '0');
    masks_json[name] = bits;
  }
  nlohmann::ordered_json skipped_json = nlohmann::ordered_json::object();
  for (const auto& [a, reason] : skipped) skipped_json[std::string(antibiotic_name(a))] = reason;
  j["train_rows"] = std::move(rows_json);
  j["skipped"] = std::move(skipped_json);
  j["train_masks"] = std::move(masks_json);
  j["models"] = std::move(models_json);
  return j;
}

MultilabelModel MultilabelModel::from_json(const nlohmann::json& j) {
  auto antibiotic = [](const std::string& name) {
    auto a = parse_antibiotic(name);
    if (!a) throw Error("unknown antibiotic '" + name + "' in model");
    return *a;
  };
  try {
    if (j.at("format").get<std::string>() != "steward-multilabel") {
      throw Error("not a multilabel model");
    }
    MultilabelModel m;
    for (const auto& [name, mj] : j.at("models").items()) {
      m.models.emplace(antibiotic(name), ForestModel::from_json(mj));
    }
    for (const auto& [name, bits] : j.at("train_masks").items()) {
      std::vector<bool> mask;
      for (char c : bits.get<std::string>()) mask.push_back(c == '1');
      m.train_masks.emplace(antibiotic(name), std::move(mask));
    }
    for (const auto& [name, reason] : j.at("skipped").items()) {
      m.skipped.emplace(antibiotic(name), reason.get<std::string>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed multilabel model: ") + e.what());
  }
}

MultilabelModel fit_multilabel(const Eigen::MatrixXd& features, const Cohort& cohort,
                               const TrainConfig& config) {
  const LabelMatrix labels = label_matrix(cohort);
  if (features.rows() != labels.label.rows()) {
    throw Error("feature matrix has " + std::to_string(features.rows()) + " rows, cohort has " +
                std::to_string(labels.label.rows()) + " visits");
  }
  struct Slot {
    std::vector<bool> mask;
    std::optional<ForestModel> model;
    std::string skipped;
  };
  std::vector<Slot> slots(kNumAntibiotics);
  TrainConfig inner = config;
  inner.threads = 1;
  parallel_for(kNumAntibiotics, config.threads, [&](std::size_t a) {
    Slot& s = slots[a];
    s.mask.resize(labels.partition.size());
    std::size_t count = 0;
    for (std::size_t r = 0; r < s.mask.size(); ++r) {
      s.mask[r] = labels.partition[r] == Partition::kTrain &&
                  labels.tested(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a));
      count += s.mask[r];
    }
    if (count == 0) {
      s.skipped = "no training labels";
      return;
    }
    try {
      s.model = fit_forest(features, labels.label.col(static_cast<Eigen::Index>(a)), s.mask, inner);
    } catch (const SingleClassError& e) {
      s.skipped = e.what();
    }
  });

  MultilabelModel out;
  for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
    if (slots[a].model) {
      out.models.emplace(kAllAntibiotics[a], std::move(*slots[a].model));
      out.train_masks.emplace(kAllAntibiotics[a], std::move(slots[a].mask));
    } else {
      out.skipped.emplace(kAllAntibiotics[a], slots[a].skipped);
    }
  }
  if (out.models.empty()) throw Error("no antibiotic has trainable labels");
  return out;
}

}  // namespace steward
