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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steward/cohort.hpp"
#include "steward/gbdt.hpp"

namespace steward {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Labels are 0/1 doubles aligned with scores.

// Probability that a random positive outscores a random negative, ties
// counting one half. Throws UndefinedMetric without both classes.
double roc_auc(const VectorRef& scores, const VectorRef& labels);

// Average precision over descending unique score thresholds, tied scores
// entering together. Throws UndefinedMetric without a positive.
double pr_auc(const VectorRef& scores, const VectorRef& labels);

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Predicted positive iff score >= threshold.
Confusion confusion_at(const VectorRef& scores, const VectorRef& labels, double threshold);

struct F1Mcc {
  double f1 = 0.0;   // 0 when 2TP + FP + FN = 0
  double mcc = 0.0;  // 0 when any denominator factor is 0
};

F1Mcc f1_and_mcc(const Confusion& c);
F1Mcc f1_and_mcc(const VectorRef& scores, const VectorRef& labels, double threshold = 0.5);

enum class Metric { kF1, kMcc, kRocAuc, kPrAuc };
inline constexpr Metric kAllMetrics[] = {Metric::kF1, Metric::kMcc, Metric::kRocAuc,
                                         Metric::kPrAuc};

std::string_view metric_name(Metric m);  // "F1", "MCC", "ROC-AUC", "PRC-AUC"
double compute_metric(Metric m, const VectorRef& scores, const VectorRef& labels,
                      double threshold = 0.5);

struct BootstrapOptions {
  int n_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  double threshold = 0.5;  // F1/MCC decision threshold
  unsigned threads = 1;    // results do not depend on this value
};

struct BootstrapResult {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_resamples = 0;  // requested
  int n_undefined = 0;  // skipped resamples
};

// Percentile bootstrap over (score, label) pairs. Resample i draws from
// an engine seeded with mix_seed(seed, i). Percentiles interpolate
// linearly between order statistics. Throws UndefinedMetric when the full
// sample is undefined or more than half the resamples are.
BootstrapResult bootstrap_ci(const VectorRef& scores, const VectorRef& labels, Metric metric,
                             const BootstrapOptions& options = {});

// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct MetricReport {
  Antibiotic antibiotic = Antibiotic::kVancomycin;
  std::string representation;
  Metric metric = Metric::kRocAuc;
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_test = 0;
  int n_resamples = 0;
  int n_undefined = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  nlohmann::ordered_json trainer;  // TrainConfig of the scored model

  nlohmann::ordered_json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

using CurvePoints = std::vector<std::pair<double, double>>;

// (false positive rate, true positive rate), from (0, 0) to (1, 1), one
// point per unique threshold.
CurvePoints roc_curve(const VectorRef& scores, const VectorRef& labels);
// (recall, precision), starting at (0, 1), one point per unique threshold.
CurvePoints pr_curve(const VectorRef& scores, const VectorRef& labels);

struct CurveSet {
  Antibiotic antibiotic = Antibiotic::kVancomycin;
  std::string representation;
  CurvePoints roc;
  CurvePoints pr;
};

struct EvalOptions {
  BootstrapOptions bootstrap;
  std::string representation;
  std::string config_fingerprint;
};

struct EvalResult {
  std::vector<MetricReport> reports;  // four per evaluated antibiotic
  std::vector<CurveSet> curves;
  std::map<Antibiotic, std::string> skipped;
};

// Scores every antibiotic model on its tested test-partition rows.
EvalResult evaluate_all(const MultilabelModel& model, const Eigen::MatrixXd& features,
                        const Cohort& cohort, const EvalOptions& options = {});

void write_metrics_json(const std::vector<MetricReport>& reports, const std::string& path);
std::vector<MetricReport> read_metrics_json(const std::string& path);

// Wide table: one row per (antibiotic, metric), one column per
// representation, cells "point ± half CI width".
void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path);

// Long-form curve points: representation,antibiotic,curve,x,y.
void write_curves_csv(const std::vector<CurveSet>& curves, const std::string& path);
std::vector<CurveSet> read_curves_csv(const std::string& path);

}  // namespace steward
