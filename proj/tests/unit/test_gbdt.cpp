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

// Histogram gradient boosting with logistic loss and the multilabel wrapper.

#include <doctest.h>

#include <cmath>
#include <random>

#include "steward/eval.hpp"
#include "steward/gbdt.hpp"
#include "steward/synthgen.hpp"
#include "support.hpp"

using namespace steward;
using steward::testing::grid_cohort;

namespace {

TrainConfig small(int trees = 20) {
  TrainConfig c;
  c.num_trees = trees;
  c.num_leaves = 8;
  c.min_samples_leaf = 2;
  c.seed = 3;
  return c;
}

std::vector<bool> all_rows(Eigen::Index n) { return std::vector<bool>(static_cast<std::size_t>(n), true); }

struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Labels from a noisy logistic of a random linear score; some NaNs.
Dataset random_dataset(int n, int d, std::uint64_t seed, double nan_rate = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset out{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w(j) = g(rng);
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    for (int j = 0; j < d; ++j) {
      const double v = g(rng);
      z += w(j) * v;
      out.x(i, j) = u(rng) < nan_rate ? std::nan("") : v;
    }
    out.y(i) = u(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  return out;
}

// Tree walk over the persisted JSON, independent of Tree::predict_row:
// bins come from a linear scan of the stored edges.
double walk(const nlohmann::json& model, const Eigen::RowVectorXd& row) {
  const auto edges = model.at("bin_edges").get<std::vector<std::vector<double>>>();
  double raw = model.at("base_score").get<double>();
  for (const auto& tree : model.at("trees")) {
    const auto& nodes = tree.at("nodes");
    std::size_t i = 0;
    while (!nodes.at(i).contains("leaf")) {
      const auto& n = nodes.at(i);
      const int f = n.at("feature").get<int>();
      const double x = row(f);
      bool left;
      if (std::isnan(x)) {
        left = n.at("default_left").get<bool>();
      } else {
        int bin = 1;
        for (double e : edges[static_cast<std::size_t>(f)]) bin += e < x;
        left = bin <= n.at("bin").get<int>();
      }
      i = n.at(left ? "left" : "right").get<std::size_t>();
    }
    raw += nodes.at(i).at("leaf").get<double>();
  }
  return raw;
}

}  // namespace

TEST_CASE("constant features reduce to the prior") {
  const int n = 1000;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(n, 3, 2.5);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = i % 10 < 3 ? 1.0 : 0.0;
  const auto model = fit(x, y, all_rows(n), small());
  const Eigen::VectorXd p = predict_proba(model, x);
  for (int i = 0; i < n; ++i) CHECK(std::abs(p(i) - 0.30) <= 0.01);
  CHECK(model.trees.size() == 20);
}

TEST_CASE("one-dimensional separable data reaches AUROC 1 within ten trees") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // At most max_bins distinct values, so no bin straddles the boundary.
  const int n = 200;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    y(i) = x(i, 0) > 0.2 ? 1.0 : 0.0;
  }
  const auto model = fit(x, y, all_rows(n), small(10));
  CHECK(roc_auc(predict_proba(model, x), y) == 1.0);
}

TEST_CASE("XOR labels are learned with four leaves") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y(i) = (x(i, 0) > 0) != (x(i, 1) > 0) ? 1.0 : 0.0;
  }
  TrainConfig c = small(200);
  c.num_leaves = 4;
  const auto model = fit(x, y, all_rows(n), c);
  const Eigen::VectorXd p = predict_proba(model, x);
  int correct = 0;
  for (int i = 0; i < n; ++i) correct += (p(i) >= 0.5) == (y(i) == 1.0);
  CHECK(correct / static_cast<double>(n) >= 0.95);
}

TEST_CASE("a zero-tree model with base score zero predicts one half") {
  ForestModel m;
  m.n_features = 4;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(7, 4);
  const Eigen::VectorXd p = predict_proba(m, x);
  for (Eigen::Index i = 0; i < 7; ++i) CHECK(p(i) == 0.5);
  CHECK_THROWS_AS(predict_proba(m, Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("predictions equal a naive walk of the persisted trees") {
  const auto d = random_dataset(400, 5, 4);
  const auto model = fit(d.x, d.y, all_rows(400), small(30));
  const auto j = nlohmann::json::parse(model.to_json().dump());
  const Eigen::VectorXd raw = predict_raw(model, d.x);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    CHECK(std::abs(raw(i) - walk(j, d.x.row(i))) <= 1e-12);
  }
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) CHECK(std::isfinite(n.value));
  }
}

TEST_CASE("a tree with positive leaves raises every probability") {
  const auto d = random_dataset(200, 3, 5);
  auto model = fit(d.x, d.y, all_rows(200), small(5));
  const Eigen::VectorXd before = predict_proba(model, d.x);
  Tree extra = model.trees.front();
  for (auto& n : extra.nodes) {
    if (n.feature < 0) n.value = 0.05 + std::abs(n.value);
  }
  model.trees.push_back(extra);
  const Eigen::VectorXd after = predict_proba(model, d.x);
  for (Eigen::Index i = 0; i < 200; ++i) CHECK(after(i) > before(i));
}

TEST_CASE("training loss never increases across rounds") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto d = random_dataset(300, 4, 100 + s);
    const auto model = fit(d.x, d.y, all_rows(300), small(25));
    REQUIRE(model.loss_history.size() == 26);
    for (std::size_t t = 1; t < model.loss_history.size(); ++t) {
      CHECK(model.loss_history[t] <= model.loss_history[t - 1]);
    }
  }
}

TEST_CASE("histogram split gain equals the exact best split") {
  // With every distinct value in its own bin the root split must attain
  // the maximum gain over all exact thresholds.
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto d = random_dataset(120, 3, 200 + s, 0.0);
    TrainConfig c;
    c.num_trees = 1;
    c.num_leaves = 2;
    c.min_samples_leaf = 1;
    c.learning_rate = 1.0;
    c.max_bins = 255;
    const auto model = fit(d.x, d.y, all_rows(120), c);
    const double p0 = 1.0 / (1.0 + std::exp(-model.base_score));
    const double lambda = c.l2_lambda;

    double best = -1.0;
    for (int f = 0; f < 3; ++f) {
      std::vector<double> values(d.x.col(f).data(), d.x.col(f).data() + 120);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double thr = 0.5 * (values[k] + values[k + 1]);
        double gl = 0, hl = 0, gr = 0, hr = 0;
        for (int i = 0; i < 120; ++i) {
          const double g = p0 - d.y(i), h = p0 * (1 - p0);
          (d.x(i, f) <= thr ? gl : gr) += g;
          (d.x(i, f) <= thr ? hl : hr) += h;
        }
        best = std::max(best, split_gain(gl, hl, gr, hr, lambda));
      }
    }

    const auto& root = model.trees.at(0).nodes.at(0);
    REQUIRE(root.feature >= 0);
    double gl = 0, hl = 0, gr = 0, hr = 0;
    for (int i = 0; i < 120; ++i) {
      const double g = p0 - d.y(i), h = p0 * (1 - p0);
      (d.x(i, root.feature) <= root.threshold ? gl : gr) += g;
      (d.x(i, root.feature) <= root.threshold ? hl : hr) += h;
    }
    CHECK(std::abs(split_gain(gl, hl, gr, hr, lambda) - best) <= 1e-12);
    // Newton leaf values.
    const auto& left = model.trees[0].nodes.at(static_cast<std::size_t>(root.left));
    CHECK(std::abs(left.value - (-gl / (hl + lambda))) <= 1e-12);
  }
}

TEST_CASE("split gain formula") {
  CHECK(split_gain(1.0, 1.0, -1.0, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(split_gain(2.0, 1.0, 2.0, 1.0, 1.0) == doctest::Approx(0.5 * (2.0 + 2.0 - 16.0 / 3.0)));
}

TEST_CASE("bin edges and bin lookup") {
  const auto edges = compute_bin_edges({3.0, 1.0, 2.0, 2.0, std::nan("")}, 255);
  CHECK(edges == std::vector<double>{1.5, 2.5});
  CHECK(bin_of(edges, std::nan("")) == 0);
  CHECK(bin_of(edges, 1.0) == 1);
  CHECK(bin_of(edges, 2.0) == 2);
  CHECK(bin_of(edges, 9.0) == 3);
  std::vector<double> many(1000);
  for (int i = 0; i < 1000; ++i) many[i] = i;
  CHECK(compute_bin_edges(many, 16).size() <= 15);
}

TEST_CASE("masked-out rows have no influence") {
  const auto d = random_dataset(300, 4, 7);
  std::vector<bool> mask(300);
  std::vector<Eigen::Index> keep;
  for (int i = 0; i < 300; ++i) {
    mask[i] = i % 3 != 0;
    if (mask[i]) keep.push_back(i);
  }
  Eigen::MatrixXd x = d.x;
  Eigen::VectorXd y = d.y;
  // Garbage in masked rows must not matter.
  for (int i = 0; i < 300; i += 3) {
    x.row(i).setConstant(1e9);
    y(i) = 1.0;
  }
  const auto a = fit(x, y, mask, small());
  const Eigen::MatrixXd xs = d.x(keep, Eigen::all);
  const Eigen::VectorXd ys = d.y(keep);
  const auto b = fit(xs, ys, all_rows(xs.rows()), small());
  CHECK(a.to_json().dump() == b.to_json().dump());
}

TEST_CASE("fitting is deterministic and thread-count independent") {
  const auto d = random_dataset(300, 6, 8);
  TrainConfig c = small();
  c.feature_fraction = 0.5;
  const auto a = fit(d.x, d.y, all_rows(300), c);
  const auto b = fit(d.x, d.y, all_rows(300), c);
  CHECK(a.to_json().dump() == b.to_json().dump());
  c.threads = 4;
  CHECK(fit(d.x, d.y, all_rows(300), c).to_json().dump() == a.to_json().dump());
}

TEST_CASE("single-class and empty inputs are rejected") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(10);
  CHECK_THROWS_AS(fit(x, ones, all_rows(10), small()), SingleClassError);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  y(0) = 1;
  std::vector<bool> only_negatives(10, true);
  only_negatives[0] = false;
  CHECK_THROWS_AS(fit(x, y, only_negatives, small()), SingleClassError);
  CHECK_THROWS_AS(fit(x, y, std::vector<bool>(10, false), small()), Error);
  CHECK_THROWS_AS(fit(x, y, std::vector<bool>(3, true), small()), Error);
}

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    TrainConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.num_trees = 0; });
  bad([](TrainConfig& c) { c.learning_rate = 0.0; });
  bad([](TrainConfig& c) { c.learning_rate = 1.5; });
  bad([](TrainConfig& c) { c.num_leaves = 1; });
  bad([](TrainConfig& c) { c.max_bins = 1; });
  bad([](TrainConfig& c) { c.max_bins = 256; });
  bad([](TrainConfig& c) { c.feature_fraction = 0.0; });
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig c = small();
  c.l2_lambda = 0.5;
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
}

TEST_CASE("forest JSON round-trips") {
  const auto d = random_dataset(200, 3, 9);
  const auto model = fit(d.x, d.y, all_rows(200), small(8));
  const auto back = ForestModel::from_json(nlohmann::json::parse(model.to_json().dump()));
  CHECK(back.to_json() == model.to_json());
  CHECK(predict_raw(back, d.x) == predict_raw(model, d.x));
}

TEST_CASE("only vancomycin labels train exactly one model") {
  Cohort c = grid_cohort(30, 1, {Antibiotic::kVancomycin});
  c = grouped_split(std::move(c), 0.2, 1);
  const auto x = random_dataset(30, 3, 10).x;
  const auto m = fit_multilabel(x, c, small(5));
  CHECK(m.models.size() == 1);
  CHECK(m.models.count(Antibiotic::kVancomycin) == 1);
  CHECK(m.skipped.size() == 9);
  CHECK_THROWS_AS(fit_multilabel(Eigen::MatrixXd::Zero(4, 3), c, small()), Error);
}

TEST_CASE("per-model training rows equal per-antibiotic label counts") {
  // Coverage per antibiotic follows the reference prevalences.
  const auto coverage = SynthConfig::defaults().coverage;
  Cohort c = grid_cohort(200, 1, {});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int k = 0;
  for (const auto& [stay, v] : c.visits) {
    for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
      if (u(rng) < coverage[a]) c.labels.push_back({v.subject_id, stay, *v.hadm_id, kAllAntibiotics[a], k++ % 2});
    }
  }
  c = grouped_split(std::move(c), 0.2, 2);
  const auto x = random_dataset(200, 4, 12).x;
  const auto m = fit_multilabel(x, c, small(3));
  for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
    const Antibiotic ab = kAllAntibiotics[a];
    std::size_t train = 0;
    for (const auto& l : c.labels) {
      train += l.antibiotic == ab && c.partition_of(l.subject_id) == Partition::kTrain;
    }
    INFO(antibiotic_name(ab));
    if (m.models.count(ab)) {
      const auto& mask = m.train_masks.at(ab);
      CHECK(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)) == train);
    } else {
      CHECK(m.skipped.count(ab) == 1);
    }
  }
  CHECK(m.models.size() + m.skipped.size() == kNumAntibiotics);
}

TEST_CASE("identical antibiotics get identical predictions") {
  Cohort c = grid_cohort(60, 1, {Antibiotic::kOxacillin, Antibiotic::kRifampin});
  // grid_cohort alternates labels across rows; copy oxacillin onto rifampin.
  std::map<StayId, int> ox;
  for (const auto& l : c.labels) {
    if (l.antibiotic == Antibiotic::kOxacillin) ox[l.stay_id] = l.susceptible;
  }
  for (auto& l : c.labels) {
    if (l.antibiotic == Antibiotic::kRifampin) l.susceptible = ox[l.stay_id];
  }
  c = grouped_split(std::move(c), 0.25, 3);
  const auto x = random_dataset(60, 3, 13).x;
  const auto m = fit_multilabel(x, c, small(10));
  CHECK(predict_raw(m.models.at(Antibiotic::kOxacillin), x) ==
        predict_raw(m.models.at(Antibiotic::kRifampin), x));

  const auto back = MultilabelModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back.to_json() == m.to_json());
}
