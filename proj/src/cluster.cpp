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

#include "steward/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "steward/parallel.hpp"

namespace steward {

Projection pca(const Eigen::MatrixXd& data, int target_dim) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (target_dim < 1 || target_dim >= d) {
    throw ConfigError("target_dim must lie in [1, " + std::to_string(d - 1) + "], got " +
                      std::to_string(target_dim));
  }
  if (n < 2) throw Error("PCA needs at least two rows");
  Projection p;
  p.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");

  p.components.resize(d, target_dim);
  p.explained_variance.resize(target_dim);
  for (int j = 0; j < target_dim; ++j) {
    const Eigen::Index src = d - 1 - j;  // eigenvalues ascend
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < d; ++i) {
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v(arg) < 0) v = -v;
    p.components.col(j) = v;
    p.explained_variance(j) = std::max(0.0, solver.eigenvalues()(src));
  }
  const double total = cov.trace();
  p.explained_ratio = total > 0 ? Eigen::VectorXd(p.explained_variance / total)
                                : Eigen::VectorXd::Zero(target_dim);
  p.reduced = centered * p.components;
  return p;
}

std::vector<std::size_t> ClusterResult::sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int a : assignments) {
    if (a >= 0) ++s[static_cast<std::size_t>(a)];
  }
  return s;
}

std::vector<std::size_t> cluster_ordering(const std::vector<int>& labels) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return labels[i] < 0 ? std::numeric_limits<int>::max() : labels[i];
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return order;
}

double mean_silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k,
                       unsigned threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  std::vector<double> s(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (size[own] <= 1) return;
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[j])] +=
          (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const double a = sum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sum.size(); ++c) {
      if (c != own && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    }
    const double m = std::max(a, b);
    s[i] = (std::isinf(b) || m == 0.0) ? 0.0 : (b - a) / m;
  });
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
}

namespace {

struct KMeansRun {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansRun kmeans_once(const Eigen::MatrixXd& x, int k, int max_iterations, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd centers(k, x.cols());

  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = x.row(first(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      const double u = unit(rng) * total;
      double acc = 0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > u && d2(i) > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  KMeansRun run;
  run.labels.assign(static_cast<std::size_t>(n), -1);
  Eigen::VectorXd best(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double bd = (x.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dist = (x.row(i) - centers.row(c)).squaredNorm();
        if (dist < bd) {
          bd = dist;
          arg = c;
        }
      }
      best(i) = bd;
      if (run.labels[static_cast<std::size_t>(i)] != arg) {
        run.labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = run.labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      ++count[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(count[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its center.
      Eigen::Index far = 0;
      best.maxCoeff(&far);
      centers.row(c) = x.row(far);
      best(far) = 0;
      run.labels[static_cast<std::size_t>(far)] = c;
      changed = true;
    }
    if (!changed) break;
  }
  run.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.inertia += (x.row(i) - centers.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return run;
}

}  // namespace

ClusterResult cluster_kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
  const Eigen::Index n = points.rows();
  if (n < 4) throw Error("clustering needs at least 4 points, got " + std::to_string(n));
  if (options.k_min < 2 || options.k_min > n - 1) {
    throw ConfigError("k_min must lie in [2, " + std::to_string(n - 1) + "]");
  }
  if (options.restarts < 1) throw ConfigError("restarts must be >= 1");
  const int k_max = static_cast<int>(std::min<Eigen::Index>(std::max(options.k_max, options.k_min), n - 1));

  ClusterResult result;
  const bool identical =
      ((points.rowwise() - points.row(0)).cwiseAbs().maxCoeff() == 0.0);
  if (identical) {
    result.assignments.assign(static_cast<std::size_t>(n), 0);
    result.k = 1;
    result.degenerate = true;
    result.ordering = cluster_ordering(result.assignments);
    return result;
  }

  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = options.k_min; k <= k_max; ++k) {
    std::vector<KMeansRun> runs(static_cast<std::size_t>(options.restarts));
    parallel_for(runs.size(), options.threads, [&](std::size_t r) {
      runs[r] = kmeans_once(points, k, options.max_iterations,
                            mix_seed(mix_seed(options.seed, static_cast<std::uint64_t>(k)), r));
    });
    std::size_t pick = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
      if (runs[r].inertia < runs[pick].inertia) pick = r;
    }
    const double score = mean_silhouette(points, runs[pick].labels, k, options.threads);
    if (score > best_score) {
      best_score = score;
      result.assignments = std::move(runs[pick].labels);
      result.k = k;
      result.silhouette = score;
    }
  }
  result.ordering = cluster_ordering(result.assignments);
  return result;
}

CtfidfResult ctfidf_terms(const std::vector<std::vector<std::string>>& documents,
                          const std::vector<int>& labels, int k, const CtfidfOptions& options) {
  if (k < 2) throw Error("class-based TF-IDF needs at least two clusters");
  if (documents.size() != labels.size()) throw Error("documents and labels differ in length");
  auto keep = [&](const std::string& t) {
    if (options.stop_tokens.count(t)) return false;
    if (options.drop_numeric &&
        std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return false;
    }
    return true;
  };
  const auto K = static_cast<std::size_t>(k);
  std::map<std::string, std::vector<double>> tf;
  std::vector<double> w(K, 0.0);
  for (std::size_t d = 0; d < documents.size(); ++d) {
    if (labels[d] < 0) continue;
    if (labels[d] >= k) throw Error("label out of range");
    const auto c = static_cast<std::size_t>(labels[d]);
    for (const auto& t : documents[d]) {
      if (!keep(t)) continue;
      auto& row = tf[t];
      if (row.empty()) row.assign(K, 0.0);
      row[c] += 1;
      w[c] += 1;
    }
  }
  CtfidfResult out;
  out.top_terms.resize(K);
  std::size_t non_empty = 0;
  for (std::size_t c = 0; c < K; ++c) {
    if (w[c] > 0) {
      ++non_empty;
    } else {
      out.warnings.push_back("cluster " + std::to_string(c) + " has no tokens; skipped");
    }
  }
  if (non_empty == 0) return out;
  const double A = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(non_empty);
  for (std::size_t c = 0; c < K; ++c) {
    if (w[c] == 0) continue;
    std::vector<TermWeight> ranked;
    for (const auto& [term, counts] : tf) {
      if (counts[c] == 0) continue;
      const double f = std::accumulate(counts.begin(), counts.end(), 0.0);
      ranked.push_back({term, counts[c] / w[c] * std::log(1.0 + A / f)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const TermWeight& a, const TermWeight& b) { return a.weight > b.weight; });
    if (ranked.size() > options.top_n) ranked.resize(options.top_n);
    out.top_terms[c] = std::move(ranked);
  }
  return out;
}

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& embeddings,
                                  const std::vector<std::size_t>& ordering) {
  const auto n = static_cast<Eigen::Index>(ordering.size());
  std::vector<bool> seen(static_cast<std::size_t>(embeddings.rows()), false);
  Eigen::MatrixXd unit(n, embeddings.cols());
  std::vector<bool> nonzero(ordering.size(), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t src = ordering[static_cast<std::size_t>(i)];
    if (src >= seen.size() || seen[src]) throw Error("ordering is not a permutation of the rows");
    seen[src] = true;
    const double norm = embeddings.row(static_cast<Eigen::Index>(src)).norm();
    nonzero[static_cast<std::size_t>(i)] = norm > 0;
    unit.row(i) = norm > 0 ? Eigen::RowVectorXd(embeddings.row(static_cast<Eigen::Index>(src)) / norm)
                           : Eigen::RowVectorXd::Zero(embeddings.cols());
  }
  if (n != embeddings.rows()) throw Error("ordering is not a permutation of the rows");
  Eigen::MatrixXd s = unit * unit.transpose();
  s = ((s + s.transpose()) / 2).cwiseMax(-1.0).cwiseMin(1.0);
  for (Eigen::Index i = 0; i < n; ++i) s(i, i) = nonzero[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return s;
}

BlockStats block_stats(const Eigen::MatrixXd& similarity, const std::vector<int>& labels) {
  double within = 0, between = 0;
  std::size_t n_within = 0, n_between = 0;
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    for (Eigen::Index j = 0; j < similarity.cols(); ++j) {
      if (i == j) continue;
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        within += similarity(i, j);
        ++n_within;
      } else {
        between += similarity(i, j);
        ++n_between;
      }
    }
  }
  return {n_within ? within / static_cast<double>(n_within) : 0.0,
          n_between ? between / static_cast<double>(n_between) : 0.0};
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("labelings differ in length");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto pairs = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [key, v] : table) index += pairs(v);
  for (const auto& [key, v] : rows) sa += pairs(v);
  for (const auto& [key, v] : cols) sb += pairs(v);
  const double total = pairs(static_cast<double>(a.size()));
  const double expected = total > 0 ? sa * sb / total : 0.0;
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

void write_similarity_csv(const Eigen::MatrixXd& similarity, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    for (Eigen::Index j = 0; j < similarity.cols(); ++j) {
      if (j) out << ',';
      out << format_number(similarity(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("cannot write " + path);
}

namespace {

// Diverging map: -1 blue, 0 white, +1 red.
std::string heat_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const auto fade = [](double t) { return static_cast<int>(std::lround(255 * (1 - t))); };
  int r = 255, g = 255, b = 255;
  if (v >= 0) {
    g = b = fade(v);
  } else {
    r = g = fade(-v);
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void write_similarity_svg(const Eigen::MatrixXd& similarity, const std::vector<int>& labels,
                          const std::string& path, int max_cells) {
  const Eigen::Index n = similarity.rows();
  const Eigen::Index block = std::max<Eigen::Index>(1, (n + max_cells - 1) / std::max(1, max_cells));
  const Eigen::Index m = n == 0 ? 0 : (n + block - 1) / block;
  const double size = 600.0, margin = 20.0;
  const double cell = m == 0 ? size : size / static_cast<double>(m);
  std::ofstream out(path, std::ios::binary);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
      << size + 2 * margin << "\" viewBox=\"0 0 " << size + 2 * margin << ' ' << size + 2 * margin
      << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
      << "<g shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index bi = 0; bi < m; ++bi) {
    for (Eigen::Index bj = 0; bj < m; ++bj) {
      const Eigen::Index r0 = bi * block, c0 = bj * block;
      const Eigen::Index rh = std::min(block, n - r0), cw = std::min(block, n - c0);
      const double v = similarity.block(r0, c0, rh, cw).mean();
      char buf[160];
      std::snprintf(buf, sizeof buf, "<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\" fill=\"%s\"/>\n",
                    margin + static_cast<double>(bj) * cell, margin + static_cast<double>(bi) * cell,
                    cell, cell, heat_color(v).c_str());
      out << buf;
    }
  }
  out << "</g>\n<g stroke=\"#000000\" stroke-width=\"1\">\n";
  for (Eigen::Index i = 1; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i - 1)]) continue;
    const double pos = margin + static_cast<double>(i) / static_cast<double>(n) * size;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\"/>\n"
                  "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\"/>\n",
                  pos, margin, pos, margin + size, margin, pos, margin + size, pos);
    out << buf;
  }
  out << "</g>\n</svg>\n";
  if (!out) throw IoError("cannot write " + path);
}

nlohmann::ordered_json to_json(const ClusterResult& r, const std::vector<std::string>& row_ids) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["silhouette"] = r.silhouette;
  j["degenerate"] = r.degenerate;
  j["sizes"] = r.sizes();
  nlohmann::ordered_json assignments = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.assignments.size(); ++i) {
    assignments.push_back({{"id", i < row_ids.size() ? row_ids[i] : std::to_string(i)},
                           {"cluster", r.assignments[i]}});
  }
  j["assignments"] = std::move(assignments);
  j["ordering"] = r.ordering;
  nlohmann::ordered_json terms = nlohmann::ordered_json::array();
  for (const auto& list : r.top_terms) {
    nlohmann::ordered_json l = nlohmann::ordered_json::array();
    for (const auto& t : list) l.push_back({{"term", t.term}, {"weight", t.weight}});
    terms.push_back(std::move(l));
  }
  j["top_terms"] = std::move(terms);
  return j;
}

}  // namespace steward
