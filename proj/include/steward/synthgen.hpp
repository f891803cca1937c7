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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "steward/common.hpp"
#include "steward/embed.hpp"

namespace steward {

struct DiagnosisTerm {
  std::string icd_code;
  std::string icd_title;
};

// One latent patient type. Its vocabulary feeds the text-visible fields of
// every visit of a patient drawn from it; its offsets shift the log-odds
// of susceptibility per antibiotic.
struct PhenotypeSpec {
  std::string name;
  double prior = 0.0;
  std::vector<std::string> complaints;        // triage chief complaint
  std::vector<std::string> medications;       // medication reconciliation names
  std::vector<DiagnosisTerm> diagnoses;       // used when codes carry signal
  std::vector<std::string> dispensed;         // pyxis names
  std::array<double, kNumAntibiotics> log_odds_offset{};
};

struct SynthConfig {
  std::size_t n_patients = 500;
  std::vector<PhenotypeSpec> phenotypes;
  std::array<double, kNumAntibiotics> base_rates{};  // P(susceptible) at offset 0
  std::array<double, kNumAntibiotics> coverage{};    // P(antibiotic tested)
  double multi_visit_rate = 0.25;
  // Share of stays whose culture fails inclusion (non-staph organism or a
  // non-qualifying specimen); their labels must be filtered out downstream.
  double nonqualifying_rate = 0.1;
  // When false the phenotype reaches only free-text fields (complaints,
  // medication names); diagnosis codes come from the shared pool.
  bool signal_in_codes = true;
  std::uint64_t seed = 7;

  // Seven phenotypes with equal priors, base rate 0.5 and coverage equal
  // to the reference per-antibiotic prevalences.
  static SynthConfig defaults();
  // Throws ConfigError when priors do not sum to 1 within 1e-9, any
  // probability leaves [0, 1], n_patients is 0, or a vocabulary is empty.
  void validate() const;
};

// Logistic of (logit(base) + offset).
double susceptibility_probability(double base_rate, double offset);

// AUROC of the Bayes-optimal score for a mixture where group k has mass
// weight[k] and positive rate p[k]: positives and negatives are compared
// pairwise across groups, ties (equal p) counting one half.
double mixture_bayes_auroc(std::span<const double> weight, std::span<const double> p);

// Tokens that occur in exactly one phenotype's vocabulary and nowhere in
// the shared pools; these are the identifiable signature of each type.
std::map<std::string, std::vector<std::string>> signature_terms(const SynthConfig& config);

struct SynthData {
  std::map<std::string, std::string> tables;  // table name -> CSV text
  nlohmann::ordered_json manifest;
};

// Pure, deterministic generation; identical config => identical bytes.
SynthData generate_tables(const SynthConfig& config);

// Writes the seven <table>.csv files and manifest.json into out_dir,
// creating it if needed. Throws IoError if anything cannot be written.
void generate(const SynthConfig& config, const std::string& out_dir);

// stay_id -> phenotype name, read from a generator manifest.
std::map<std::string, std::string> phenotype_of_stay(const nlohmann::json& manifest);

// Ground-truth embeddings: one random centroid per phenotype (entries
// N(0, 1/dim), so norms near 1) plus isotropic noise with expected norm
// `noise`. Noise for a stay depends only on (seed, stay_id), so rows are
// independent of order. Throws Error for a stay missing from the manifest.
EmbeddingMatrix planted_embeddings(const nlohmann::json& manifest,
                                   const std::vector<std::string>& stay_ids, int dim,
                                   double noise, std::uint64_t seed);

nlohmann::ordered_json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace steward
