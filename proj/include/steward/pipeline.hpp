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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steward/cohort.hpp"
#include "steward/embed.hpp"
#include "steward/ingest.hpp"
#include "steward/notes.hpp"

namespace steward {

// In-memory building blocks shared by the command-line stages.

struct CohortOptions {
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  LabelOptions labels;
  InclusionOptions inclusion;
};

struct IngestSummary {
  std::size_t visits_assembled = 0;
  std::size_t visits_kept = 0;
  std::size_t label_rows = 0;
  std::size_t label_rows_kept = 0;
  std::size_t duplicate_labels = 0;
  std::size_t unknown_antibiotics = 0;
  std::vector<RejectedRow> rejected;
};

// Parses CSV text keyed by table name against the standard schemas.
SourceTables parse_source_tables(const std::map<std::string, std::string>& csv_text);

// Assembly, microbiology extraction, inclusion criteria and the grouped
// split, in that order.
Cohort build_cohort(const SourceTables& tables, const CohortOptions& options,
                    IngestSummary* summary = nullptr);

// One note per visit in canonical order, truncated to `budget_tokens`
// when it is non-zero.
std::vector<PseudoNote> serialize_cohort(const Cohort& cohort, const TemplateSet& templates,
                                         std::size_t budget_tokens, unsigned threads = 1);

// Per visit in canonical order: subject assigned to the training partition.
std::vector<bool> training_rows(const Cohort& cohort);

EmbeddingMatrix embed_bow(const std::vector<PseudoNote>& notes, std::size_t buckets);

// Trains word vectors on the notes flagged in `train_rows` and mean-pools
// every note. The trained vectors are returned through `vectors_out`.
EmbeddingMatrix embed_word2vec(const std::vector<PseudoNote>& notes,
                               const std::vector<bool>& train_rows, const SgnsConfig& config,
                               WordVectors* vectors_out = nullptr);

}  // namespace steward
