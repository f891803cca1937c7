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

#include "steward/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace steward {

namespace {
constexpr std::array<std::string_view, 6> kSpecimenNames = {
    "blood", "urine", "cerebral_spinal_fluid", "pleural_cavity", "joint_fluid", "other",
};
}  // namespace

std::string_view specimen_name(SpecimenSource s) {
  return kSpecimenNames[static_cast<std::size_t>(s)];
}

SpecimenSource parse_specimen(std::string_view text) {
  std::string key = to_lower(text);
  std::replace(key.begin(), key.end(), ' ', '_');
  for (std::size_t i = 0; i < kSpecimenNames.size(); ++i) {
    if (key == kSpecimenNames[i]) return static_cast<SpecimenSource>(i);
  }
  return SpecimenSource::kOther;
}

bool is_qualifying_specimen(SpecimenSource s) { return s != SpecimenSource::kOther; }

std::map<StayId, std::size_t> Cohort::row_index() const {
  std::map<StayId, std::size_t> index;
  std::size_t i = 0;
  for (const auto& [stay, visit] : visits) index.emplace(stay, i++);
  return index;
}

Partition Cohort::partition_of(const SubjectId& subject) const {
  auto it = split.find(subject);
  if (it == split.end()) throw Error("subject " + subject + " has no partition");
  return it->second;
}

Cohort apply_inclusion_criteria(const std::vector<EDVisit>& visits,
                                const std::vector<CultureResult>& cultures,
                                const std::vector<PrescriptionLabelRow>& labels,
                                const InclusionOptions& options) {
  std::map<StayId, const EDVisit*> by_stay;
  for (const auto& v : visits) by_stay.emplace(v.stay_id, &v);

  std::vector<std::string> offending;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!by_stay.count(labels[i].stay_id)) {
      offending.push_back("label row " + std::to_string(i) + ": stay_id '" +
                          labels[i].stay_id + "' (subject " + labels[i].subject_id +
                          ", " + std::string(antibiotic_name(labels[i].antibiotic)) + ")");
    }
  }
  if (!offending.empty()) {
    throw ValidationError(std::to_string(offending.size()) +
                              " label row(s) reference unknown stay_id",
                          std::move(offending));
  }

  std::set<std::pair<SubjectId, HadmId>> qualifying;
  for (const auto& c : cultures) {
    if (!is_qualifying_specimen(c.specimen_source) || c.organism_name.empty()) continue;
    const bool match = std::any_of(
        options.organism_patterns.begin(), options.organism_patterns.end(),
        [&](const std::string& p) { return icontains(c.organism_name, p); });
    if (match) qualifying.emplace(c.subject_id, c.hadm_id);
  }

  Cohort out;
  for (const auto& row : labels) {
    if (!qualifying.count({row.subject_id, row.hadm_id})) continue;
    out.labels.push_back(row);
    if (!out.visits.count(row.stay_id)) out.visits.emplace(row.stay_id, *by_stay.at(row.stay_id));
  }
  return out;
}

Cohort grouped_split(Cohort cohort, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  std::map<SubjectId, std::size_t> rows_per_subject;
  for (const auto& v : cohort.visits) rows_per_subject.emplace(v.second.subject_id, 0);
  for (const auto& l : cohort.labels) ++rows_per_subject[l.subject_id];
  if (rows_per_subject.size() < 2) {
    throw ConfigError("grouped_split needs at least 2 subjects, got " +
                      std::to_string(rows_per_subject.size()));
  }

  // Seeded ordering keyed on a hash of the subject id: independent of map
  // order and of the standard library's shuffle algorithm.
  std::vector<std::tuple<std::uint64_t, SubjectId, std::size_t>> order;
  std::size_t total = 0;
  for (const auto& [subject, rows] : rows_per_subject) {
    order.emplace_back(mix_seed(seed, fnv1a64(subject)), subject, rows);
    total += rows;
  }
  std::sort(order.begin(), order.end());

  const double target = test_fraction * static_cast<double>(std::max<std::size_t>(total, 1));
  double assigned = 0.0;
  cohort.split.clear();
  for (const auto& [key, subject, rows] : order) {
    const double with = assigned + static_cast<double>(rows);
    const bool take = std::abs(with - target) < std::abs(assigned - target);
    if (take) assigned = with;
    cohort.split[subject] = take ? Partition::kTest : Partition::kTrain;
  }
  // Both partitions must be non-empty.
  const auto n_test = std::count_if(cohort.split.begin(), cohort.split.end(),
                                    [](const auto& kv) { return kv.second == Partition::kTest; });
  if (n_test == 0) {
    cohort.split[std::get<1>(order.front())] = Partition::kTest;
  } else if (static_cast<std::size_t>(n_test) == cohort.split.size()) {
    cohort.split[std::get<1>(order.back())] = Partition::kTrain;
  }
  return cohort;
}

double prevalence_pct(std::size_t train_count, std::size_t test_count, std::size_t total) {
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(train_count + test_count) / static_cast<double>(total);
}

std::array<PrevalenceRow, kNumAntibiotics> prevalence_table(const Cohort& cohort) {
  std::array<PrevalenceRow, kNumAntibiotics> table{};
  for (std::size_t i = 0; i < kNumAntibiotics; ++i) table[i].antibiotic = kAllAntibiotics[i];
  std::set<StayId> prescriptions;
  for (const auto& row : cohort.labels) {
    prescriptions.insert(row.stay_id);
    auto& entry = table[index_of(row.antibiotic)];
    if (cohort.partition_of(row.subject_id) == Partition::kTrain) {
      ++entry.train_count;
    } else {
      ++entry.test_count;
    }
  }
  for (auto& entry : table) {
    entry.prevalence_pct = prevalence_pct(entry.train_count, entry.test_count, prescriptions.size());
  }
  return table;
}

LabelMatrix label_matrix(const Cohort& cohort) {
  LabelMatrix m;
  const auto n = static_cast<Eigen::Index>(cohort.visits.size());
  m.label = Eigen::MatrixXd::Zero(n, kNumAntibiotics);
  m.tested = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, kNumAntibiotics, false);
  for (const auto& [stay, visit] : cohort.visits) {
    m.stay_ids.push_back(stay);
    m.partition.push_back(cohort.partition_of(visit.subject_id));
  }
  const auto index = cohort.row_index();
  for (const auto& row : cohort.labels) {
    const auto it = index.find(row.stay_id);
    if (it == index.end()) throw Error("label row for unknown stay " + row.stay_id);
    const auto r = static_cast<Eigen::Index>(it->second);
    const auto a = static_cast<Eigen::Index>(index_of(row.antibiotic));
    m.tested(r, a) = true;
    m.label(r, a) = row.susceptible;
  }
  return m;
}

}  // namespace steward
