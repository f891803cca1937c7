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

// Metric suite, percentile bootstrap, curves and report files.

#include <doctest.h>

#include <cmath>
#include <random>

#include "steward/csv.hpp"
#include "steward/eval.hpp"
#include "support.hpp"

using namespace steward;
using steward::testing::grid_cohort;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Scores drawn from a few levels so ties are common.
std::pair<Eigen::VectorXd, Eigen::VectorXd> random_fixture(std::mt19937_64& rng, int n, bool ties) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd s(n), y(n);
  for (int i = 0; i < n; ++i) {
    y(i) = u(rng) < 0.4 ? 1.0 : 0.0;
    s(i) = ties ? std::floor(u(rng) * 6.0) / 6.0 + 0.1 * y(i) * u(rng) * (u(rng) < 0.5) : u(rng) + 0.3 * y(i);
  }
  if (y.sum() == 0) y(0) = 1;
  if (y.sum() == n) y(0) = 0;
  return {s, y};
}

double brute_auroc(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  double num = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) != 1.0) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(j) != 0.0) continue;
      pairs += 1.0;
      num += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

// Sweep every distinct score as a ">=" threshold, highest first.
double brute_ap(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  std::vector<double> t(s.data(), s.data() + s.size());
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  const double pos = y.sum();
  double ap = 0.0, prev_recall = 0.0;
  for (double thr : t) {
    double tp = 0, fp = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) >= thr) (y(i) == 1.0 ? tp : fp) += 1;
    }
    const double recall = tp / pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

}  // namespace

TEST_CASE("AUROC examples") {
  CHECK(roc_auc(vec({0.1, 0.9}), vec({0, 1})) == 1.0);
  CHECK(roc_auc(vec({0.3, 0.3, 0.3, 0.3}), vec({0, 1, 1, 0})) == 0.5);
  CHECK(roc_auc(vec({0.9, 0.1}), vec({0, 1})) == 0.0);
  CHECK_THROWS_AS(roc_auc(vec({0.1, 0.2}), vec({1, 1})), UndefinedMetric);
  CHECK_THROWS_AS(roc_auc(vec({}), vec({})), UndefinedMetric);
}

TEST_CASE("AUROC equals brute-force pair counting") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [s, y] = random_fixture(rng, 2 + static_cast<int>(rng() % 199), trial % 2 == 0);
    CHECK(std::abs(roc_auc(s, y) - brute_auroc(s, y)) <= 1e-12);
  }
}

TEST_CASE("AUROC is invariant under strictly monotone maps") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [s, y] = random_fixture(rng, 120, trial % 2 == 0);
    const double base = roc_auc(s, y);
    CHECK(roc_auc(s.array().exp().matrix(), y) == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc((3.0 * s.array() - 7.0).matrix(), y) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("AUROC of negated scores is the complement without ties") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [s, y] = random_fixture(rng, 80, false);
    CHECK(std::abs(roc_auc(s, y) + roc_auc(-s, y) - 1.0) <= 1e-12);
  }
}

TEST_CASE("average precision examples") {
  CHECK(pr_auc(vec({0.9, 0.8, 0.2, 0.1}), vec({1, 1, 0, 0})) == 1.0);
  CHECK(pr_auc(vec({0.5, 0.1, 0.7}), vec({1, 1, 1})) == 1.0);
  CHECK_THROWS_AS(pr_auc(vec({0.5, 0.1}), vec({0, 0})), UndefinedMetric);
  // Tied top pair enters together: precision 1/2 at recall 1.
  CHECK(pr_auc(vec({0.5, 0.5}), vec({1, 0})) == 0.5);
}

TEST_CASE("average precision equals a brute-force threshold sweep") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [s, y] = random_fixture(rng, 2 + static_cast<int>(rng() % 199), trial % 2 == 0);
    CHECK(std::abs(pr_auc(s, y) - brute_ap(s, y)) <= 1e-12);
  }
}

TEST_CASE("F1 and MCC") {
  const auto perfect = f1_and_mcc(vec({0.9, 0.1, 0.7}), vec({1, 0, 1}));
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.mcc == 1.0);

  const auto all_one = f1_and_mcc(vec({0.9, 0.8, 0.7}), vec({1, 0, 1}));
  CHECK(all_one.mcc == 0.0);
  const auto none = f1_and_mcc(vec({0.1, 0.2}), vec({0, 0}));
  CHECK(none.f1 == 0.0);
  CHECK(none.mcc == 0.0);

  const auto hand = f1_and_mcc(Confusion{3, 1, 2, 4});
  CHECK(std::abs(hand.f1 - 6.0 / 9.0) <= 1e-15);
  CHECK(std::abs(hand.mcc - (3.0 * 4 - 1.0 * 2) / std::sqrt(4.0 * 5 * 5 * 6)) <= 1e-15);

  // Predicted positive at exactly the threshold.
  const auto c = confusion_at(vec({0.5, 0.49}), vec({1, 1}), 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
}

TEST_CASE("MCC magnitude survives flipping both polarities") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(0, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const Confusion c{d(rng), d(rng), d(rng), d(rng)};
    // Swapping class roles exchanges TP with TN and FP with FN.
    const Confusion flipped{c.tn, c.fn, c.fp, c.tp};
    CHECK(std::abs(std::abs(f1_and_mcc(c).mcc) - std::abs(f1_and_mcc(flipped).mcc)) <= 1e-12);
  }
}

TEST_CASE("metric names") {
  CHECK(metric_name(Metric::kF1) == "F1");
  CHECK(metric_name(Metric::kMcc) == "MCC");
  CHECK(metric_name(Metric::kRocAuc) == "ROC-AUC");
  CHECK(metric_name(Metric::kPrAuc) == "PRC-AUC");
}

TEST_CASE("bootstrap on perfectly separated data has a zero-width interval") {
  Eigen::VectorXd s(60), y(60);
  for (int i = 0; i < 60; ++i) y(i) = i % 2, s(i) = 0.2 + 0.6 * (i % 2) + 0.001 * i;
  for (Metric m : kAllMetrics) {
    BootstrapOptions o;
    o.n_resamples = 200;
    const auto r = bootstrap_ci(s, y, m, o);
    CHECK(r.ci_low == r.point);
    CHECK(r.ci_high == r.point);
  }
}

TEST_CASE("a single resample pins both endpoints to its value") {
  std::mt19937_64 rng(6);
  const auto [s, y] = random_fixture(rng, 50, false);
  BootstrapOptions o;
  o.n_resamples = 1;
  o.seed = 17;
  const auto r = bootstrap_ci(s, y, Metric::kRocAuc, o);
  CHECK(r.ci_low == r.ci_high);
  // Replay the documented draw.
  std::mt19937_64 eng(mix_seed(17, 0));
  std::uniform_int_distribution<Eigen::Index> pick(0, 49);
  Eigen::VectorXd rs(50), ry(50);
  for (int i = 0; i < 50; ++i) {
    const auto j = pick(eng);
    rs(i) = s(j), ry(i) = y(j);
  }
  CHECK(r.ci_low == doctest::Approx(roc_auc(rs, ry)).epsilon(1e-12));
}

TEST_CASE("bootstrap is deterministic per seed and thread count") {
  std::mt19937_64 rng(7);
  const auto [s, y] = random_fixture(rng, 150, true);
  BootstrapOptions o;
  o.n_resamples = 300;
  o.seed = 3;
  const auto a = bootstrap_ci(s, y, Metric::kPrAuc, o);
  const auto b = bootstrap_ci(s, y, Metric::kPrAuc, o);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
  o.threads = 4;
  const auto c = bootstrap_ci(s, y, Metric::kPrAuc, o);
  CHECK(c.ci_low == a.ci_low);
  CHECK(c.ci_high == a.ci_high);
  CHECK(a.ci_low <= a.ci_high);
  CHECK(a.point == pr_auc(s, y));
  o.seed = 4;
  const auto d = bootstrap_ci(s, y, Metric::kPrAuc, o);
  CHECK((d.ci_low != a.ci_low || d.ci_high != a.ci_high));
}

TEST_CASE("undefined resamples are skipped and counted") {
  // One positive among 40: a resample misses it with probability near 1/e.
  Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(40, 0.0, 1.0);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(40);
  y(39) = 1.0;
  BootstrapOptions o;
  o.n_resamples = 400;
  o.seed = 9;
  const auto r = bootstrap_ci(s, y, Metric::kRocAuc, o);
  int undefined = 0;
  for (int i = 0; i < 400; ++i) {
    std::mt19937_64 eng(mix_seed(9, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<Eigen::Index> pick(0, 39);
    bool has_positive = false;
    for (int k = 0; k < 40; ++k) has_positive = has_positive || pick(eng) == 39;
    undefined += !has_positive;
  }
  CHECK(r.n_undefined == undefined);
  CHECK(r.n_resamples == 400);
  CHECK(undefined > 100);

  // Undefined on the full sample.
  CHECK_THROWS_AS(bootstrap_ci(s, Eigen::VectorXd::Zero(40), Metric::kRocAuc), UndefinedMetric);
  // Two rows, one per class: a resample is single-class with probability
  // 1/2, and a seed where more than half are undefined must raise.
  const auto s2 = vec({0.2, 0.8});
  const auto y2 = vec({0, 1});
  bool raised = false, passed = false;
  for (std::uint64_t seed = 0; seed < 40 && !(raised && passed); ++seed) {
    BootstrapOptions small;
    small.n_resamples = 21;
    small.seed = seed;
    int bad = 0;
    for (int i = 0; i < 21; ++i) {
      std::mt19937_64 eng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      std::uniform_int_distribution<Eigen::Index> pick(0, 1);
      bad += pick(eng) == pick(eng);
    }
    if (bad > 10) {
      CHECK_THROWS_AS(bootstrap_ci(s2, y2, Metric::kRocAuc, small), UndefinedMetric);
      raised = true;
    } else {
      CHECK(bootstrap_ci(s2, y2, Metric::kRocAuc, small).n_undefined == bad);
      passed = true;
    }
  }
  CHECK(raised);
  CHECK(passed);
  // F1 is always defined.
  CHECK(bootstrap_ci(s, y, Metric::kF1).n_undefined == 0);
}

TEST_CASE("quantiles interpolate between order statistics") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted({7.0}, 0.3) == 7.0);
}

TEST_CASE("curves start and end at the fixed corners") {
  const auto s = vec({0.9, 0.8, 0.8, 0.3, 0.1});
  const auto y = vec({1, 0, 1, 0, 1});
  const auto roc = roc_curve(s, y);
  CHECK(roc.front() == std::make_pair(0.0, 0.0));
  CHECK(roc.back() == std::make_pair(1.0, 1.0));
  CHECK(roc.size() == 5);  // origin plus four distinct scores
  const auto pr = pr_curve(s, y);
  CHECK(pr.front() == std::make_pair(0.0, 1.0));
  CHECK(pr.back().first == 1.0);
  // Trapezoid area under the step-free ROC equals the rank statistic.
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].first - roc[i - 1].first) * 0.5 * (roc[i].second + roc[i - 1].second);
  }
  CHECK(area == doctest::Approx(roc_auc(s, y)).epsilon(1e-12));
}

TEST_CASE("evaluate_all reports four metrics per evaluable antibiotic") {
  Cohort c = grid_cohort(80, 1, {Antibiotic::kVancomycin, Antibiotic::kOxacillin, Antibiotic::kRifampin});
  // Rifampin all susceptible in the test split leaves it unevaluable.
  c = grouped_split(std::move(c), 0.3, 5);
  for (auto& l : c.labels) {
    if (l.antibiotic == Antibiotic::kRifampin && c.partition_of(l.subject_id) == Partition::kTest) {
      l.susceptible = 1;
    }
  }
  Eigen::MatrixXd x(80, 2);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const auto lm = label_matrix(c);
  for (Eigen::Index r = 0; r < 80; ++r) {
    x(r, 0) = g(rng) + lm.label(r, static_cast<Eigen::Index>(index_of(Antibiotic::kVancomycin)));
    x(r, 1) = g(rng);
  }
  TrainConfig tc;
  tc.num_trees = 10;
  tc.min_samples_leaf = 3;
  const auto model = fit_multilabel(x, c, tc);
  REQUIRE(model.models.size() == 3);
  EvalOptions eo;
  eo.bootstrap.n_resamples = 100;
  eo.representation = "unit";
  eo.config_fingerprint = "abc";
  const auto res = evaluate_all(model, x, c, eo);
  CHECK(res.reports.size() == 4 * 2);
  CHECK(res.skipped.count(Antibiotic::kRifampin) == 1);
  CHECK(res.curves.size() == 2);
  for (const auto& r : res.reports) {
    CHECK(r.ci_low <= r.ci_high);
    CHECK(std::isfinite(r.point));
    CHECK(r.representation == "unit");
    CHECK(r.config_fingerprint == "abc");
    CHECK(r.n_resamples == 100);
    CHECK(r.trainer.at("num_trees") == 10);
  }

  steward::testing::TempDir dir;
  write_metrics_json(res.reports, dir / "metrics.json");
  const auto back = read_metrics_json(dir / "metrics.json");
  REQUIRE(back.size() == res.reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(nlohmann::json(back[i].to_json()) == nlohmann::json(res.reports[i].to_json()));
  }

  write_curves_csv(res.curves, dir / "curves.csv");
  const auto curves = read_curves_csv(dir / "curves.csv");
  REQUIRE(curves.size() == res.curves.size());
  CHECK(curves[0].roc == res.curves[0].roc);
  CHECK(curves[1].pr == res.curves[1].pr);

  write_metrics_csv(res.reports, dir / "metrics.csv");
  const auto rows = csv::parse(steward::testing::slurp(dir.path() / "metrics.csv"));
  REQUIRE(rows.size() == 1 + 8);
  CHECK(rows[0] == csv::Row{"antibiotic", "metric", "unit"});
  const auto& first = res.reports.front();
  char want[64];
  std::snprintf(want, sizeof want, "%.4f \xC2\xB1 %.3f", first.point, (first.ci_high - first.ci_low) / 2);
  bool found = false;
  for (const auto& r : rows) found = found || r.back() == want;
  CHECK(found);
}

TEST_CASE("a one-antibiotic cohort yields exactly four reports") {
  Cohort c = grid_cohort(40, 1, {Antibiotic::kVancomycin});
  c = grouped_split(std::move(c), 0.3, 6);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(40, 2);
  TrainConfig tc;
  tc.num_trees = 5;
  tc.min_samples_leaf = 2;
  EvalOptions eo;
  eo.bootstrap.n_resamples = 50;
  const auto res = evaluate_all(fit_multilabel(x, c, tc), x, c, eo);
  CHECK(res.reports.size() == 4);
}
