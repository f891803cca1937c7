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

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steward/cohort.hpp"
#include "steward/common.hpp"

namespace steward {

// Raised by fit() when the masked-in labels hold a single class. Callers
// training many targets skip that target and record the message.
class SingleClassError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  int num_trees = 200;
  double learning_rate = 0.1;
  int num_leaves = 31;
  int min_samples_leaf = 20;
  double l2_lambda = 1.0;
  int max_bins = 255;
  double feature_fraction = 1.0;
  std::uint64_t seed = 0;
  // Histogram construction threads. Results do not depend on this value.
  unsigned threads = 1;

  // Throws ConfigError on num_trees < 1, learning_rate outside (0, 1],
  // num_leaves < 2, min_samples_leaf < 1, l2_lambda < 0, max_bins outside
  // [2, 255] or feature_fraction outside (0, 1].
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// A node is a leaf when feature < 0. Internal nodes send a row left when
// its value is <= threshold, and NaN rows to the default side.
struct TreeNode {
  int feature = -1;
  int bin = 0;  // left child takes value bins 1..bin
  double threshold = 0.0;
  bool default_left = false;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, learning rate already applied
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0

  template <typename Derived>
  double predict_row(const Eigen::DenseBase<Derived>& row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      const double x = static_cast<double>(row(n.feature));
      const bool left = std::isnan(x) ? n.default_left : x <= n.threshold;
      i = left ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
  std::size_t leaf_count() const;
};

struct ForestModel {
  TrainConfig config;
  double base_score = 0.0;  // prior log-odds
  int n_features = 0;
  // Per feature, ascending upper edges of value bins 1..k-1; bin k is open.
  std::vector<std::vector<double>> bin_edges;
  std::vector<Tree> trees;
  // Mean training log-loss before the first tree and after each tree.
  std::vector<double> loss_history;

  nlohmann::ordered_json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
};

// Bins assigned by a model's edges: 0 for NaN, else 1 + #{edges < x}.
int bin_of(const std::vector<double>& edges, double x);

// Edges for one feature from its non-NaN values: one bin per distinct value
// when they number <= max_bins, quantile cuts otherwise. Edges sit midway
// between neighbouring distinct values.
std::vector<double> compute_bin_edges(std::vector<double> values, int max_bins);

// Split gain 0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda);

// Boosts on rows where mask is true; other rows are never read, so
// removing them leaves the model bitwise unchanged. Labels are 0/1; NaN
// features count as missing. Throws SingleClassError on one class and
// Error when no row is masked in or the shapes disagree.
ForestModel fit_forest(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                       const std::vector<bool>& mask, const TrainConfig& config);

template <typename Derived>
ForestModel fit(const Eigen::MatrixBase<Derived>& features, const Eigen::VectorXd& labels,
                const std::vector<bool>& mask, const TrainConfig& config) {
  return fit_forest(features.template cast<double>().eval(), labels, mask, config);
}

// base_score + sum of tree outputs, per row. Throws Error on a feature
// count mismatch.
template <typename Derived>
Eigen::VectorXd predict_raw(const ForestModel& model, const Eigen::MatrixBase<Derived>& features) {
  if (features.cols() != model.n_features) {
    throw Error("model expects " + std::to_string(model.n_features) + " features, got " +
                std::to_string(features.cols()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(features.rows(), model.base_score);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (const Tree& t : model.trees) out(r) += t.predict_row(features.row(r));
  }
  return out;
}

template <typename Derived>
Eigen::VectorXd predict_proba(const ForestModel& model, const Eigen::MatrixBase<Derived>& features) {
  return predict_raw(model, features).unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

double logistic_loss(const Eigen::VectorXd& raw, const Eigen::VectorXd& labels,
                     const std::vector<bool>& mask);

// One independent forest per antibiotic, each fit on training-partition
// rows where that antibiotic was tested.
struct MultilabelModel {
  std::map<Antibiotic, ForestModel> models;
  std::map<Antibiotic, std::vector<bool>> train_masks;
  std::map<Antibiotic, std::string> skipped;  // antibiotic -> reason

  nlohmann::ordered_json to_json() const;
  static MultilabelModel from_json(const nlohmann::json& j);
};

// Feature rows follow the cohort's canonical visit order. Throws Error when
// the row count disagrees or no antibiotic is trainable.
MultilabelModel fit_multilabel(const Eigen::MatrixXd& features, const Cohort& cohort,
                               const TrainConfig& config);

}  // namespace steward
