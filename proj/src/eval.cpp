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

#include "steward/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "steward/csv.hpp"
#include "steward/parallel.hpp"

namespace steward {

namespace {

void check_inputs(const VectorRef& scores, const VectorRef& labels) {
  if (scores.size() != labels.size()) {
    throw Error("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                std::to_string(labels.size()) + ")");
  }
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores(i))) throw Error("score " + std::to_string(i) + " is NaN");
    if (labels(i) != 0.0 && labels(i) != 1.0) throw Error("labels must be 0 or 1");
  }
}

// Indices ordered by descending score; ties keep index order.
std::vector<Eigen::Index> descending(const VectorRef& scores) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  return order;
}

// Cumulative (fp, tp) after each group of tied scores, descending.
std::vector<std::pair<double, double>> threshold_counts(const VectorRef& scores,
                                                        const VectorRef& labels) {
  const auto order = descending(scores);
  std::vector<std::pair<double, double>> out;
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (labels(order[i]) == 1.0 ? tp : fp) += 1;
    if (i + 1 == order.size() || scores(order[i + 1]) != scores(order[i])) out.emplace_back(fp, tp);
  }
  return out;
}

}  // namespace

double roc_auc(const VectorRef& scores, const VectorRef& labels) {
  check_inputs(scores, labels);
  const double pos = labels.sum();
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetric("ROC-AUC needs both classes");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores(a) < scores(b);
  });
  // Sum of positive mid-ranks (1-based), tie groups sharing their mean rank.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_pos = 0;
    while (j < order.size() && scores(order[j]) == scores(order[i])) group_pos += labels(order[j++]);
    rank_sum += group_pos * (static_cast<double>(i + 1 + j)) / 2.0;
    i = j;
  }
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double pr_auc(const VectorRef& scores, const VectorRef& labels) {
  check_inputs(scores, labels);
  const double pos = labels.sum();
  if (pos == 0) throw UndefinedMetric("PRC-AUC needs a positive label");
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& [fp, tp] : threshold_counts(scores, labels)) {
    const double recall = tp / pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

Confusion confusion_at(const VectorRef& scores, const VectorRef& labels, double threshold) {
  check_inputs(scores, labels);
  Confusion c;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool predicted = scores(i) >= threshold;
    const bool actual = labels(i) == 1.0;
    if (predicted) {
      ++(actual ? c.tp : c.fp);
    } else {
      ++(actual ? c.fn : c.tn);
    }
  }
  return c;
}

F1Mcc f1_and_mcc(const Confusion& c) {
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  F1Mcc r;
  const double f1_den = 2 * tp + fp + fn;
  r.f1 = f1_den == 0 ? 0.0 : 2 * tp / f1_den;
  const double a = tp + fp, b = tp + fn, d = tn + fp, e = tn + fn;
  r.mcc = (a == 0 || b == 0 || d == 0 || e == 0) ? 0.0 : (tp * tn - fp * fn) / std::sqrt(a * b * d * e);
  return r;
}

F1Mcc f1_and_mcc(const VectorRef& scores, const VectorRef& labels, double threshold) {
  return f1_and_mcc(confusion_at(scores, labels, threshold));
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kF1: return "F1";
    case Metric::kMcc: return "MCC";
    case Metric::kRocAuc: return "ROC-AUC";
    case Metric::kPrAuc: return "PRC-AUC";
  }
  return "?";
}

namespace {

Metric parse_metric(const std::string& name) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw Error("unknown metric '" + name + "'");
}

}  // namespace

double compute_metric(Metric m, const VectorRef& scores, const VectorRef& labels, double threshold) {
  switch (m) {
    case Metric::kF1: return f1_and_mcc(scores, labels, threshold).f1;
    case Metric::kMcc: return f1_and_mcc(scores, labels, threshold).mcc;
    case Metric::kRocAuc: return roc_auc(scores, labels);
    case Metric::kPrAuc: return pr_auc(scores, labels);
  }
  throw Error("unknown metric");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

BootstrapResult bootstrap_ci(const VectorRef& scores, const VectorRef& labels, Metric metric,
                             const BootstrapOptions& options) {
  if (options.n_resamples < 1) throw ConfigError("n_resamples must be >= 1");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  BootstrapResult r;
  r.point = compute_metric(metric, scores, labels, options.threshold);
  r.n_resamples = options.n_resamples;

  const auto n = scores.size();
  const auto count = static_cast<std::size_t>(options.n_resamples);
  std::vector<double> values(count, std::numeric_limits<double>::quiet_NaN());
  parallel_for(count, options.threads, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(options.seed, i));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::VectorXd s(n), y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index j = pick(rng);
      s(k) = scores(j);
      y(k) = labels(j);
    }
    try {
      values[i] = compute_metric(metric, s, y, options.threshold);
    } catch (const UndefinedMetric&) {
    }
  });

  std::vector<double> defined;
  for (double v : values) {
    if (std::isnan(v)) {
      ++r.n_undefined;
    } else {
      defined.push_back(v);
    }
  }
  if (2 * static_cast<std::size_t>(r.n_undefined) > count) {
    throw UndefinedMetric(std::string(metric_name(metric)) + " undefined in " +
                          std::to_string(r.n_undefined) + " of " + std::to_string(count) +
                          " resamples; sample too degenerate");
  }
  std::sort(defined.begin(), defined.end());
  const double tail = (1.0 - options.level) / 2.0;
  r.ci_low = quantile_sorted(defined, tail);
  r.ci_high = quantile_sorted(defined, 1.0 - tail);
  return r;
}

CurvePoints roc_curve(const VectorRef& scores, const VectorRef& labels) {
  check_inputs(scores, labels);
  const double pos = labels.sum();
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetric("ROC curve needs both classes");
  CurvePoints pts{{0.0, 0.0}};
  for (const auto& [fp, tp] : threshold_counts(scores, labels)) pts.emplace_back(fp / neg, tp / pos);
  return pts;
}

CurvePoints pr_curve(const VectorRef& scores, const VectorRef& labels) {
  check_inputs(scores, labels);
  const double pos = labels.sum();
  if (pos == 0) throw UndefinedMetric("PR curve needs a positive label");
  CurvePoints pts{{0.0, 1.0}};
  for (const auto& [fp, tp] : threshold_counts(scores, labels)) {
    pts.emplace_back(tp / pos, tp / (tp + fp));
  }
  return pts;
}

nlohmann::ordered_json MetricReport::to_json() const {
  return {{"antibiotic", antibiotic_name(antibiotic)},
          {"representation", representation},
          {"metric", metric_name(metric)},
          {"point", point},
          {"ci_low", ci_low},
          {"ci_high", ci_high},
          {"n_test", n_test},
          {"n_resamples", n_resamples},
          {"n_undefined", n_undefined},
          {"seed", seed},
          {"config_fingerprint", config_fingerprint},
          {"trainer", trainer}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    const auto name = j.at("antibiotic").get<std::string>();
    const auto a = parse_antibiotic(name);
    if (!a) throw Error("unknown antibiotic '" + name + "' in report");
    r.antibiotic = *a;
    r.representation = j.value("representation", "");
    r.metric = parse_metric(j.at("metric").get<std::string>());
    r.point = j.at("point").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.n_test = j.value("n_test", std::size_t{0});
    r.n_resamples = j.value("n_resamples", 0);
    r.n_undefined = j.value("n_undefined", 0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.config_fingerprint = j.value("config_fingerprint", "");
    if (j.contains("trainer")) r.trainer = j.at("trainer");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed metric report: ") + e.what());
  }
}

EvalResult evaluate_all(const MultilabelModel& model, const Eigen::MatrixXd& features,
                        const Cohort& cohort, const EvalOptions& options) {
  const LabelMatrix labels = label_matrix(cohort);
  if (features.rows() != labels.label.rows()) {
    throw Error("feature matrix has " + std::to_string(features.rows()) + " rows, cohort has " +
                std::to_string(labels.label.rows()) + " visits");
  }
  EvalResult out;
  out.skipped = model.skipped;
  for (const auto& [antibiotic, forest] : model.models) {
    const auto a = static_cast<Eigen::Index>(index_of(antibiotic));
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < labels.label.rows(); ++r) {
      if (labels.partition[static_cast<std::size_t>(r)] == Partition::kTest && labels.tested(r, a)) {
        rows.push_back(r);
      }
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd x(n, features.cols());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = features.row(rows[static_cast<std::size_t>(i)]);
      y(i) = labels.label(rows[static_cast<std::size_t>(i)], a);
    }
    if (n == 0 || y.sum() == 0 || y.sum() == static_cast<double>(n)) {
      out.skipped[antibiotic] = "test labels contain a single class (" +
                                std::to_string(static_cast<long long>(y.sum())) + " positive of " +
                                std::to_string(n) + ")";
      continue;
    }
    const Eigen::VectorXd scores = predict_proba(forest, x);

    std::vector<MetricReport> reports;
    try {
      for (Metric m : kAllMetrics) {
        const BootstrapResult b = bootstrap_ci(scores, y, m, options.bootstrap);
        MetricReport r;
        r.antibiotic = antibiotic;
        r.representation = options.representation;
        r.metric = m;
        r.point = b.point;
        r.ci_low = b.ci_low;
        r.ci_high = b.ci_high;
        r.n_test = rows.size();
        r.n_resamples = b.n_resamples;
        r.n_undefined = b.n_undefined;
        r.seed = options.bootstrap.seed;
        r.config_fingerprint = options.config_fingerprint;
        r.trainer = forest.config.to_json();
        reports.push_back(std::move(r));
      }
    } catch (const UndefinedMetric& e) {
      out.skipped[antibiotic] = e.what();
      continue;
    }
    out.reports.insert(out.reports.end(), reports.begin(), reports.end());
    out.curves.push_back(
        {antibiotic, options.representation, roc_curve(scores, y), pr_curve(scores, y)});
  }
  return out;
}

void write_metrics_json(const std::vector<MetricReport>& reports, const std::string& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(r.to_json());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path);
}

std::vector<MetricReport> read_metrics_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  std::vector<MetricReport> out;
  for (const auto& r : j) out.push_back(MetricReport::from_json(r));
  return out;
}

void write_metrics_csv(const std::vector<MetricReport>& reports, const std::string& path) {
  std::vector<std::string> reps;
  std::map<std::pair<Antibiotic, Metric>, std::map<std::string, const MetricReport*>> cells;
  for (const auto& r : reports) {
    if (std::find(reps.begin(), reps.end(), r.representation) == reps.end()) {
      reps.push_back(r.representation);
    }
    cells[{r.antibiotic, r.metric}][r.representation] = &r;
  }
  std::ofstream out(path, std::ios::binary);
  csv::Row header{"antibiotic", "metric"};
  header.insert(header.end(), reps.begin(), reps.end());
  csv::write_row(out, header);
  for (const auto& [key, by_rep] : cells) {
    csv::Row row{std::string(antibiotic_name(key.first)), std::string(metric_name(key.second))};
    for (const auto& rep : reps) {
      const auto it = by_rep.find(rep);
      if (it == by_rep.end()) {
        row.emplace_back();
        continue;
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f \xC2\xB1 %.3f", it->second->point,
                    (it->second->ci_high - it->second->ci_low) / 2.0);
      row.emplace_back(buf);
    }
    csv::write_row(out, row);
  }
  if (!out) throw IoError("cannot write " + path);
}

void write_curves_csv(const std::vector<CurveSet>& curves, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  csv::write_row(out, {"representation", "antibiotic", "curve", "x", "y"});
  for (const auto& c : curves) {
    const std::string a(antibiotic_name(c.antibiotic));
    for (const auto& [x, y] : c.roc) {
      csv::write_row(out, {c.representation, a, "roc", format_number(x), format_number(y)});
    }
    for (const auto& [x, y] : c.pr) {
      csv::write_row(out, {c.representation, a, "pr", format_number(x), format_number(y)});
    }
  }
  if (!out) throw IoError("cannot write " + path);
}

std::vector<CurveSet> read_curves_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  std::vector<CurveSet> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw IoError(path + ": row " + std::to_string(i) + " has " +
                                     std::to_string(r.size()) + " fields, expected 5");
    const auto a = parse_antibiotic(r[1]);
    if (!a) throw IoError(path + ": unknown antibiotic '" + r[1] + "'");
    if (out.empty() || out.back().representation != r[0] || out.back().antibiotic != *a) {
      out.push_back({*a, r[0], {}, {}});
    }
    auto& target = r[2] == "roc" ? out.back().roc : out.back().pr;
    target.emplace_back(std::stod(r[3]), std::stod(r[4]));
  }
  return out;
}

}  // namespace steward
