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

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steward/common.hpp"

namespace steward {

struct Projection {
  Eigen::VectorXd mean;                // column means of the input
  Eigen::MatrixXd components;          // dim x target, orthonormal columns
  Eigen::VectorXd explained_variance;  // per component, descending
  Eigen::VectorXd explained_ratio;     // of total variance
  Eigen::MatrixXd reduced;             // n x target, centered scores
};

// Principal components from the centered covariance. Each component is
// sign-fixed so its largest-magnitude entry is positive (first on ties).
// Throws ConfigError unless 1 <= target_dim < dim, and Error for n < 2.
Projection pca(const Eigen::MatrixXd& data, int target_dim);

template <typename Derived>
Projection reduce_dims(const Eigen::MatrixBase<Derived>& data, int target_dim) {
  return pca(data.template cast<double>().eval(), target_dim);
}

struct TermWeight {
  std::string term;
  double weight = 0.0;
};

struct ClusterResult {
  std::vector<int> assignments;  // per row, in [0, k); -1 reserved for noise
  int k = 0;
  double silhouette = 0.0;  // mean silhouette of the chosen k
  bool degenerate = false;  // all points identical; single-cluster fallback
  std::vector<std::size_t> ordering;  // rows grouped by cluster id
  std::vector<std::vector<TermWeight>> top_terms;  // per cluster id

  std::vector<std::size_t> sizes() const;
};

struct KMeansOptions {
  int k_min = 2;
  int k_max = 10;  // clamped to n - 1
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // results do not depend on this value
};

// k-means++ seeding and Lloyd iterations, best-inertia restart per k, k
// chosen by the highest mean silhouette (smaller k on ties). Throws Error
// for n < 4 and ConfigError when k_min < 2 or k_min > n - 1.
ClusterResult cluster_kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options = {});

// Mean silhouette of a labelling; singleton clusters contribute 0.
double mean_silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k,
                       unsigned threads = 1);

// Row indices stably grouped by ascending label, noise (-1) last.
std::vector<std::size_t> cluster_ordering(const std::vector<int>& labels);

struct CtfidfOptions {
  std::size_t top_n = 10;
  std::set<std::string> stop_tokens;  // never ranked
  bool drop_numeric = true;           // skip all-digit tokens
};

struct CtfidfResult {
  std::vector<std::vector<TermWeight>> top_terms;  // per cluster id
  std::vector<std::string> warnings;
};

// W(t, c) = tf(t, c) / w_c * log(1 + A / f_t), with w_c the token count of
// cluster c, f_t the frequency of t over all clusters and A the mean token
// count per non-empty cluster. Ranked by weight, then term. Empty clusters
// yield an empty list and a warning. Throws Error when k < 2 or the
// sizes of documents and labels differ.
CtfidfResult ctfidf_terms(const std::vector<std::vector<std::string>>& documents,
                          const std::vector<int>& labels, int k, const CtfidfOptions& options = {});

// Pairwise cosine similarity of rows taken in `ordering`; zero-norm rows
// give 0 against everything including themselves.
Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& embeddings,
                                  const std::vector<std::size_t>& ordering);

struct BlockStats {
  double within = 0.0;   // mean over same-label pairs, diagonal excluded
  double between = 0.0;  // mean over different-label pairs
};

// Labels are given in the matrix's row order.
BlockStats block_stats(const Eigen::MatrixXd& similarity, const std::vector<int>& labels);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

void write_similarity_csv(const Eigen::MatrixXd& similarity, const std::string& path);
// Heatmap, downsampled by block means to at most max_cells per side, with
// lines at cluster boundaries (labels in matrix row order).
void write_similarity_svg(const Eigen::MatrixXd& similarity, const std::vector<int>& labels,
                          const std::string& path, int max_cells = 200);

nlohmann::ordered_json to_json(const ClusterResult& r, const std::vector<std::string>& row_ids);

}  // namespace steward
