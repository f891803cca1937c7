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

#include "steward/tabfeat.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <optional>
#include <set>

#include "steward/parallel.hpp"

namespace steward {

std::map<std::string, std::vector<std::size_t>> FeatureFrame::dictionary() const {
  std::map<std::string, std::vector<std::size_t>> d;
  for (std::size_t j = 0; j < sources.size(); ++j) d[sources[j]].push_back(j);
  return d;
}

Eigen::MatrixXd FeatureFrame::with_nan() const {
  return missing.select(Eigen::MatrixXd::Constant(rows(), cols(),
                                                  std::numeric_limits<double>::quiet_NaN()),
                        values);
}

EmbeddingMatrix FeatureFrame::to_matrix() const {
  EmbeddingMatrix m;
  m.backend_id = "tabular";
  m.values = with_nan().cast<float>();
  m.stay_ids = stay_ids;
  return m;
}

namespace {

constexpr const char* kNull = "(null)";
constexpr const char* kOther = "OTHER";

using Optional = std::optional<double>;

struct VitalKind {
  const char* name;
  Optional VitalSign::*field;
};

constexpr VitalKind kVitalKinds[] = {
    {"temperature", &VitalSign::temperature}, {"heartrate", &VitalSign::heartrate},
    {"resprate", &VitalSign::resprate},       {"o2sat", &VitalSign::o2sat},
    {"sbp", &VitalSign::sbp},                 {"dbp", &VitalSign::dbp},
    {"pain", &VitalSign::pain},
};

struct TriageKind {
  const char* name;
  Optional TriageInfo::*field;
};

constexpr TriageKind kTriageKinds[] = {
    {"temperature", &TriageInfo::temperature}, {"heartrate", &TriageInfo::heartrate},
    {"resprate", &TriageInfo::resprate},       {"o2sat", &TriageInfo::o2sat},
    {"sbp", &TriageInfo::sbp},                 {"dbp", &TriageInfo::dbp},
    {"pain", &TriageInfo::pain},
};

std::optional<std::string> last_rhythm(const EDVisit& v) {
  for (auto it = v.vitals.rbegin(); it != v.vitals.rend(); ++it) {
    if (it->rhythm) return it->rhythm;
  }
  return std::nullopt;
}

struct Categorical {
  std::string field;
  std::optional<std::string> (*value)(const EDVisit&);
};

const Categorical kCategoricals[] = {
    {"gender", [](const EDVisit& v) { return v.arrival.gender; }},
    {"race", [](const EDVisit& v) { return v.arrival.race; }},
    {"arrival_transport", [](const EDVisit& v) { return v.arrival.arrival_transport; }},
    {"disposition", [](const EDVisit& v) { return v.arrival.disposition; }},
    {"rhythm", &last_rhythm},
};

std::string diagnosis_key(const DiagnosisCode& d) {
  std::string code;
  for (char c : d.icd_code) {
    if (c == '.' || std::isspace(static_cast<unsigned char>(c))) continue;
    code.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (code.size() == 3) break;
  }
  return std::to_string(d.icd_version) + ":" + code;
}

class Layout {
 public:
  std::size_t add(std::string name, std::string source) {
    names.push_back(std::move(name));
    sources.push_back(std::move(source));
    return names.size() - 1;
  }
  std::vector<std::string> names;
  std::vector<std::string> sources;
};

struct NumericColumn {
  std::size_t value;
  std::size_t indicator;
};

}  // namespace

FeatureFrame featurize_tabular(const Cohort& cohort, const TabularOptions& options) {
  std::vector<const EDVisit*> visits;
  for (const auto& [id, v] : cohort.visits) visits.push_back(&v);
  const std::size_t n = visits.size();

  Layout layout;
  auto numeric = [&](const std::string& name) {
    return NumericColumn{layout.add(name, name), layout.add(name + ":missing", name)};
  };

  const NumericColumn age = numeric("age");
  std::vector<NumericColumn> triage;
  for (const auto& k : kTriageKinds) triage.push_back(numeric(std::string("triage.") + k.name));
  const NumericColumn acuity = numeric("triage.acuity");

  struct VitalColumns {
    std::size_t last, min, max, mean, indicator;
  };
  std::vector<VitalColumns> vital_cols;
  for (const auto& k : kVitalKinds) {
    const std::string base = std::string("vitals.") + k.name;
    VitalColumns c{};
    c.last = layout.add(base + ".last", base);
    c.min = layout.add(base + ".min", base);
    c.max = layout.add(base + ".max", base);
    c.mean = layout.add(base + ".mean", base);
    c.indicator = layout.add(base + ":missing", base);
    vital_cols.push_back(c);
  }

  // Category levels: top-cap by frequency then name, the rest to OTHER.
  struct Levels {
    std::map<std::string, std::size_t> column;
    std::size_t other = 0;
  };
  std::vector<Levels> levels;
  for (const auto& cat : kCategoricals) {
    std::map<std::string, std::size_t> counts;
    for (const EDVisit* v : visits) ++counts[cat.value(*v).value_or(kNull)];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > options.cardinality_cap) ranked.resize(options.cardinality_cap);
    std::sort(ranked.begin(), ranked.end());
    Levels l;
    for (const auto& [name, count] : ranked) {
      l.column[name] = layout.add(cat.field + "=" + name, cat.field);
    }
    l.other = layout.add(cat.field + "=" + kOther, cat.field);
    levels.push_back(std::move(l));
  }

  std::set<std::string> dx_keys;
  for (const EDVisit* v : visits) {
    for (const auto& d : v->diagnoses) dx_keys.insert(diagnosis_key(d));
  }
  std::map<std::string, std::size_t> dx_col;
  for (const auto& key : dx_keys) dx_col[key] = layout.add("dx=" + key, "diagnosis");

  FeatureFrame f;
  f.names = std::move(layout.names);
  f.sources = std::move(layout.sources);
  const auto cols = static_cast<Eigen::Index>(f.names.size());
  f.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), cols);
  f.missing = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
      static_cast<Eigen::Index>(n), cols, false);
  for (const EDVisit* v : visits) f.stay_ids.push_back(v->stay_id);

  parallel_for(n, thread_cap(), [&](std::size_t i) {
    const EDVisit& v = *visits[i];
    const auto r = static_cast<Eigen::Index>(i);
    auto put = [&](const NumericColumn& c, Optional x) {
      const auto vc = static_cast<Eigen::Index>(c.value);
      if (x) {
        f.values(r, vc) = *x;
      } else {
        f.missing(r, vc) = true;
        f.values(r, static_cast<Eigen::Index>(c.indicator)) = 1.0;
      }
    };

    put(age, v.arrival.age ? Optional(static_cast<double>(*v.arrival.age)) : std::nullopt);
    for (std::size_t k = 0; k < std::size(kTriageKinds); ++k) {
      put(triage[k], v.triage ? (*v.triage).*(kTriageKinds[k].field) : std::nullopt);
    }
    put(acuity, v.triage && v.triage->acuity ? Optional(static_cast<double>(*v.triage->acuity))
                                             : std::nullopt);

    for (std::size_t k = 0; k < std::size(kVitalKinds); ++k) {
      const auto& c = vital_cols[k];
      Optional last;
      double lo = 0, hi = 0, sum = 0;
      std::size_t count = 0;
      for (const auto& s : v.vitals) {
        const Optional x = s.*(kVitalKinds[k].field);
        if (!x) continue;
        lo = count == 0 ? *x : std::min(lo, *x);
        hi = count == 0 ? *x : std::max(hi, *x);
        sum += *x;
        ++count;
        last = x;
      }
      if (count == 0) {
        for (std::size_t col : {c.last, c.min, c.max, c.mean}) {
          f.missing(r, static_cast<Eigen::Index>(col)) = true;
        }
        f.values(r, static_cast<Eigen::Index>(c.indicator)) = 1.0;
      } else {
        f.values(r, static_cast<Eigen::Index>(c.last)) = *last;
        f.values(r, static_cast<Eigen::Index>(c.min)) = lo;
        f.values(r, static_cast<Eigen::Index>(c.max)) = hi;
        f.values(r, static_cast<Eigen::Index>(c.mean)) = sum / static_cast<double>(count);
      }
    }

    for (std::size_t c = 0; c < std::size(kCategoricals); ++c) {
      const std::string value = kCategoricals[c].value(v).value_or(kNull);
      const auto it = levels[c].column.find(value);
      const std::size_t col = it == levels[c].column.end() ? levels[c].other : it->second;
      f.values(r, static_cast<Eigen::Index>(col)) = 1.0;
    }

    for (const auto& d : v.diagnoses) {
      f.values(r, static_cast<Eigen::Index>(dx_col.at(diagnosis_key(d)))) = 1.0;
    }
  });
  return f;
}

}  // namespace steward
