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

// Dummy-coded tabular features.

#include <doctest.h>

#include <set>

#include "steward/tabfeat.hpp"
#include "support.hpp"

using namespace steward;
using steward::testing::bare_visit;
using steward::testing::full_visit;

namespace {

Cohort cohort_of(const std::vector<EDVisit>& visits) {
  Cohort c;
  for (const auto& v : visits) c.visits.emplace(v.stay_id, v);
  return c;
}

Eigen::Index column(const FeatureFrame& f, const std::string& name) {
  const auto it = std::find(f.names.begin(), f.names.end(), name);
  REQUIRE_MESSAGE(it != f.names.end(), name);
  return static_cast<Eigen::Index>(it - f.names.begin());
}

Eigen::Index row(const FeatureFrame& f, const std::string& stay) {
  const auto it = std::find(f.stay_ids.begin(), f.stay_ids.end(), stay);
  REQUIRE(it != f.stay_ids.end());
  return static_cast<Eigen::Index>(it - f.stay_ids.begin());
}

const std::vector<std::string> kCategoricalFields = {"gender", "race", "arrival_transport",
                                                     "disposition", "rhythm"};

// Five visits with overlapping categories and diagnoses.
std::vector<EDVisit> five_visits() {
  std::vector<EDVisit> v = {full_visit("s1", "t1"), full_visit("s2", "t2"), bare_visit("s3", "t3"),
                            full_visit("s4", "t4"), bare_visit("s5", "t5")};
  v[1].arrival.gender = "M";
  v[1].arrival.race = "ASIAN";
  v[1].diagnoses = {{1, "A41.9", 10, "Sepsis"}, {2, "J189", 10, "Pneumonia"}};
  v[3].arrival.disposition = "HOME";
  v[3].diagnoses.push_back({3, "A402", 10, "Streptococcal sepsis"});
  v[4].arrival.gender = "F";
  v[4].diagnoses = {{1, "4019", 9, "Hypertension"}};
  return v;
}

}  // namespace

TEST_CASE("a category seen once gets its own column") {
  std::vector<EDVisit> visits = {bare_visit("a", "1"), bare_visit("b", "2"), bare_visit("c", "3")};
  visits[1].arrival.race = "PACIFIC ISLANDER";
  const auto f = featurize_tabular(cohort_of(visits));
  const auto col = column(f, "race=PACIFIC ISLANDER");
  CHECK(f.values(row(f, "2"), col) == 1.0);
  CHECK(f.values.col(col).sum() == 1.0);
  CHECK(f.values(row(f, "1"), column(f, "race=(null)")) == 1.0);
}

TEST_CASE("cap of one leaves one named column plus OTHER") {
  std::vector<EDVisit> visits = {bare_visit("a", "1"), bare_visit("b", "2"), bare_visit("c", "3"),
                                 bare_visit("d", "4")};
  visits[0].arrival.arrival_transport = "WALK IN";
  visits[1].arrival.arrival_transport = "WALK IN";
  visits[2].arrival.arrival_transport = "AMBULANCE";
  visits[3].arrival.arrival_transport = "HELICOPTER";
  const auto f = featurize_tabular(cohort_of(visits), {1});
  std::vector<std::string> named;
  for (std::size_t j = 0; j < f.names.size(); ++j) {
    if (f.sources[j] == "arrival_transport") named.push_back(f.names[j]);
  }
  CHECK(named == std::vector<std::string>{"arrival_transport=WALK IN", "arrival_transport=OTHER"});
  const auto other = column(f, "arrival_transport=OTHER");
  CHECK(f.values.col(other).sum() == 2.0);
}

TEST_CASE("five-visit fixture matches a brute-force tally") {
  const auto visits = five_visits();
  const auto f = featurize_tabular(cohort_of(visits));

  // Numeric block: age, seven triage kinds and acuity carry value plus
  // indicator; seven vital kinds carry last/min/max/mean plus indicator.
  std::size_t want = 2 + 7 * 2 + 2 + 7 * 5;
  std::map<std::string, std::set<std::string>> levels;
  std::set<std::string> dx;
  for (const auto& v : visits) {
    levels["gender"].insert(v.arrival.gender.value_or("(null)"));
    levels["race"].insert(v.arrival.race.value_or("(null)"));
    levels["arrival_transport"].insert(v.arrival.arrival_transport.value_or("(null)"));
    levels["disposition"].insert(v.arrival.disposition.value_or("(null)"));
    std::string rhythm = "(null)";
    for (const auto& s : v.vitals) {
      if (s.rhythm) rhythm = *s.rhythm;
    }
    levels["rhythm"].insert(rhythm);
    for (const auto& d : v.diagnoses) {
      std::string code;
      for (char c : d.icd_code) {
        if (c != '.' && code.size() < 3) code += c;
      }
      dx.insert(std::to_string(d.icd_version) + ":" + code);
    }
  }
  for (const auto& field : kCategoricalFields) want += levels[field].size() + 1;
  want += dx.size();
  CHECK(static_cast<std::size_t>(f.cols()) == want);
  CHECK(f.rows() == 5);

  // Multi-hot sums per diagnosis column.
  for (const auto& key : dx) {
    int expect = 0;
    for (const auto& v : visits) {
      bool hit = false;
      for (const auto& d : v.diagnoses) {
        std::string code;
        for (char c : d.icd_code) {
          if (c != '.' && code.size() < 3) code += c;
        }
        hit = hit || std::to_string(d.icd_version) + ":" + code == key;
      }
      expect += hit;
    }
    CHECK(f.values.col(column(f, "dx=" + key)).sum() == expect);
  }
  CHECK(f.values.col(column(f, "dx=10:A41")).sum() == 3.0);
}

TEST_CASE("one-hot rows sum to one per categorical") {
  const auto f = featurize_tabular(cohort_of(five_visits()), {2});
  const auto dict = f.dictionary();
  for (const auto& field : kCategoricalFields) {
    const auto& cols = dict.at(field);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      double sum = 0.0;
      for (auto c : cols) sum += f.values(r, static_cast<Eigen::Index>(c));
      CHECK(sum == 1.0);
    }
  }
}

TEST_CASE("frame invariants: unique names, aligned mask, no NaN") {
  const auto f = featurize_tabular(cohort_of(five_visits()));
  CHECK(std::set<std::string>(f.names.begin(), f.names.end()).size() == f.names.size());
  CHECK(f.sources.size() == f.names.size());
  CHECK(f.missing.rows() == f.values.rows());
  CHECK(f.missing.cols() == f.values.cols());
  CHECK_FALSE(f.values.hasNaN());
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      if (f.missing(r, c)) CHECK(f.values(r, c) == 0.0);
    }
  }
  const auto nan = f.with_nan();
  CHECK(nan.array().isNaN().cast<int>().sum() == f.missing.cast<int>().sum());
  CHECK(std::is_sorted(f.stay_ids.begin(), f.stay_ids.end()));
}

TEST_CASE("numeric passthrough and vital aggregates") {
  const auto f = featurize_tabular(cohort_of(five_visits()));
  const auto r = row(f, "t1");
  CHECK(f.values(r, column(f, "age")) == 67.0);
  CHECK(f.values(r, column(f, "triage.temperature")) == 98.6);
  CHECK(f.values(r, column(f, "vitals.heartrate.last")) == 88.0);
  CHECK(f.values(r, column(f, "vitals.heartrate.min")) == 88.0);
  CHECK(f.values(r, column(f, "vitals.heartrate.max")) == 104.0);
  CHECK(f.values(r, column(f, "vitals.heartrate.mean")) == 96.0);
  CHECK(f.values(r, column(f, "vitals.o2sat:missing")) == 1.0);
  CHECK(f.missing(r, column(f, "vitals.o2sat.mean")));
  const auto bare = row(f, "t3");
  CHECK(f.values(bare, column(f, "age:missing")) == 1.0);
  CHECK(f.missing(bare, column(f, "age")));
  CHECK(f.values(r, column(f, "age:missing")) == 0.0);
}

TEST_CASE("column dictionary round-trips to the column list") {
  const auto f = featurize_tabular(cohort_of(five_visits()));
  const auto dict = f.dictionary();
  std::vector<std::size_t> seen;
  for (const auto& [source, cols] : dict) {
    CHECK(std::is_sorted(cols.begin(), cols.end()));
    for (auto c : cols) {
      CHECK(f.sources[c] == source);
      seen.push_back(c);
    }
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen.size() == f.names.size());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);

  const auto m = f.to_matrix();
  CHECK(m.backend_id == "tabular");
  CHECK(m.stay_ids == f.stay_ids);
  CHECK(m.values.cols() == f.cols());
  CHECK(std::isnan(m.values(row(f, "t3"), column(f, "age"))));
}

TEST_CASE("column order is deterministic") {
  auto visits = five_visits();
  const auto a = featurize_tabular(cohort_of(visits));
  std::reverse(visits.begin(), visits.end());
  const auto b = featurize_tabular(cohort_of(visits));
  CHECK(a.names == b.names);
  CHECK(a.values == b.values);
}
