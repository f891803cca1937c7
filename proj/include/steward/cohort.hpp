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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steward/common.hpp"
#include "steward/timestamp.hpp"

namespace steward {

using SubjectId = std::string;
using StayId = std::string;
using HadmId = std::string;

// ---------------------------------------------------------------------------
// Clinical modalities of one ED stay. Optional members are nullable source
// columns; a disengaged optional never renders into a note.

struct ArrivalInfo {
  Timestamp intime;
  std::optional<Timestamp> outtime;
  std::optional<std::int64_t> age;
  std::optional<std::string> gender;
  std::optional<std::string> race;
  std::optional<std::string> arrival_transport;
  std::optional<std::string> disposition;
};

struct TriageInfo {
  std::optional<double> temperature;
  std::optional<double> heartrate;
  std::optional<double> resprate;
  std::optional<double> o2sat;
  std::optional<double> sbp;
  std::optional<double> dbp;
  std::optional<double> pain;
  std::optional<std::int64_t> acuity;
  std::optional<std::string> chiefcomplaint;
};

struct MedreconEntry {
  Timestamp charttime;
  std::string name;
  std::optional<std::string> gsn;
  std::optional<std::string> etcdescription;
};

struct VitalSign {
  Timestamp charttime;
  std::optional<double> temperature;
  std::optional<double> heartrate;
  std::optional<double> resprate;
  std::optional<double> o2sat;
  std::optional<double> sbp;
  std::optional<double> dbp;
  std::optional<std::string> rhythm;
  std::optional<double> pain;
};

struct DiagnosisCode {
  std::int64_t seq_num = 0;
  std::string icd_code;
  std::int64_t icd_version = 10;
  std::string icd_title;
};

struct PyxisEvent {
  Timestamp charttime;
  std::string name;
  std::optional<std::int64_t> med_rn;
  std::optional<std::string> gsn;
};

struct EDVisit {
  SubjectId subject_id;
  StayId stay_id;
  std::optional<HadmId> hadm_id;
  ArrivalInfo arrival;
  std::optional<TriageInfo> triage;
  std::vector<MedreconEntry> medrecon;
  std::vector<VitalSign> vitals;
  std::vector<DiagnosisCode> diagnoses;
  std::vector<PyxisEvent> pyxis;
};

enum class SpecimenSource : std::uint8_t {
  kBlood,
  kUrine,
  kCerebralSpinalFluid,
  kPleuralCavity,
  kJointFluid,
  kOther,
};

std::string_view specimen_name(SpecimenSource s);
// Unrecognised sources map to kOther.
SpecimenSource parse_specimen(std::string_view text);
bool is_qualifying_specimen(SpecimenSource s);

struct CultureResult {
  SubjectId subject_id;
  HadmId hadm_id;
  std::string organism_name;
  SpecimenSource specimen_source = SpecimenSource::kOther;
  Timestamp collected_at;
};

struct PrescriptionLabelRow {
  SubjectId subject_id;
  StayId stay_id;
  HadmId hadm_id;
  Antibiotic antibiotic = Antibiotic::kVancomycin;
  int susceptible = 0;  // 1 = positive class under the configured polarity
};

enum class Partition : std::uint8_t { kTrain, kTest };

// Visits are keyed by stay_id; map iteration order is the canonical row
// order for every per-visit matrix downstream (notes, features, labels).
struct Cohort {
  std::map<StayId, EDVisit> visits;
  std::vector<PrescriptionLabelRow> labels;
  std::map<SubjectId, Partition> split;

  // Row index of each visit in canonical order.
  std::map<StayId, std::size_t> row_index() const;
  Partition partition_of(const SubjectId& subject) const;
};

struct InclusionOptions {
  // Case-insensitive substrings; a culture qualifies if any matches.
  std::vector<std::string> organism_patterns = {"staph"};
};

// Keeps label rows whose (subject_id, hadm_id) links to at least one
// qualifying culture and drops visits left without labels. Throws
// ValidationError if any label row names a stay_id absent from `visits`.
Cohort apply_inclusion_criteria(const std::vector<EDVisit>& visits,
                                const std::vector<CultureResult>& cultures,
                                const std::vector<PrescriptionLabelRow>& labels,
                                const InclusionOptions& options = {});

// Subject-level split. Subjects are shuffled deterministically by seed and
// greedily assigned to the test partition until its label-row share reaches
// test_fraction; a subject is only added when doing so moves the share
// closer to the target. Requires 0 < test_fraction < 1 and >= 2 subjects.
Cohort grouped_split(Cohort cohort, double test_fraction, std::uint64_t seed);

struct PrevalenceRow {
  Antibiotic antibiotic;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double prevalence_pct = 0.0;
};

// Dense per-visit labels in canonical row order. `tested(r, a)` is false
// where antibiotic a has no label row for visit r; `label` is 0 there.
struct LabelMatrix {
  Eigen::MatrixXd label;                                   // rows x 10
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> tested;  // rows x 10
  std::vector<Partition> partition;                        // per row
  std::vector<StayId> stay_ids;
};

// Requires every visit's subject to have a partition.
LabelMatrix label_matrix(const Cohort& cohort);

// (train + test) / total * 100, guarding total == 0.
double prevalence_pct(std::size_t train_count, std::size_t test_count, std::size_t total);

// One row per antibiotic in fixed order. The denominator is the number of
// label-bearing prescriptions, i.e. distinct stays carrying >= 1 label row.
std::array<PrevalenceRow, kNumAntibiotics> prevalence_table(const Cohort& cohort);

// Lossless JSON form of a cohort (visits, labels, split); stage artifact
// of ingestion. Throws Error on malformed input.
nlohmann::ordered_json to_json(const Cohort& cohort);
Cohort cohort_from_json(const nlohmann::json& j);

}  // namespace steward
