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

#include "steward/pipeline.hpp"

#include "steward/parallel.hpp"
#include "steward/tokenize.hpp"

namespace steward {

SourceTables parse_source_tables(const std::map<std::string, std::string>& csv_text) {
  SourceTables out;
  auto load = [&](std::string_view name) {
    const auto it = csv_text.find(std::string(name));
    if (it == csv_text.end()) throw IoError("missing table " + std::string(name));
    out.tables.emplace(std::string(name), parse_table(it->second, schema_for(name)));
  };
  for (auto name : kModalityTables) load(name);
  load(kMicroTable);
  return out;
}

Cohort build_cohort(const SourceTables& tables, const CohortOptions& options,
                    IngestSummary* summary) {
  AssembledVisits assembled = assemble_visits(tables.tables);
  const auto micro_it = tables.tables.find(std::string(kMicroTable));
  if (micro_it == tables.tables.end()) throw IoError("missing table micro_susceptibility");
  const Microbiology micro = extract_microbiology(micro_it->second, options.labels);
  Cohort cohort = apply_inclusion_criteria(assembled.visits, micro.cultures, micro.labels,
                                           options.inclusion);
  if (summary) {
    summary->visits_assembled = assembled.visits.size();
    summary->visits_kept = cohort.visits.size();
    summary->label_rows = micro.labels.size();
    summary->label_rows_kept = cohort.labels.size();
    summary->duplicate_labels = micro.duplicate_labels;
    summary->unknown_antibiotics = micro.unknown_antibiotics;
    summary->rejected = std::move(assembled.rejected);
  }
  return grouped_split(std::move(cohort), options.test_fraction, options.split_seed);
}

std::vector<PseudoNote> serialize_cohort(const Cohort& cohort, const TemplateSet& templates,
                                         std::size_t budget_tokens, unsigned threads) {
  std::vector<const EDVisit*> visits;
  for (const auto& [stay, v] : cohort.visits) visits.push_back(&v);
  std::vector<PseudoNote> notes(visits.size());
  parallel_for(visits.size(), threads, [&](std::size_t i) {
    PseudoNote n = serialize_visit(*visits[i], templates);
    notes[i] = budget_tokens > 0 ? truncate_to_budget(n, budget_tokens) : std::move(n);
  });
  return notes;
}

std::vector<bool> training_rows(const Cohort& cohort) {
  std::vector<bool> out;
  for (const auto& [stay, v] : cohort.visits) {
    out.push_back(cohort.partition_of(v.subject_id) == Partition::kTrain);
  }
  return out;
}

EmbeddingMatrix embed_bow(const std::vector<PseudoNote>& notes, std::size_t buckets) {
  EmbeddingMatrix m;
  m.backend_id = "bow:" + std::to_string(buckets);
  m.values.resize(static_cast<Eigen::Index>(notes.size()), static_cast<Eigen::Index>(buckets));
  for (std::size_t i = 0; i < notes.size(); ++i) {
    m.values.row(static_cast<Eigen::Index>(i)) = embed_hashed_bow(notes[i].text, buckets).transpose();
    m.stay_ids.push_back(notes[i].stay_id);
    m.truncated.push_back(notes[i].truncated);
  }
  return m;
}

EmbeddingMatrix embed_word2vec(const std::vector<PseudoNote>& notes,
                               const std::vector<bool>& train_rows, const SgnsConfig& config,
                               WordVectors* vectors_out) {
  if (train_rows.size() != notes.size()) throw Error("train_rows must align with notes");
  Corpus corpus;
  std::vector<std::vector<std::string>> tokens(notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    tokens[i] = tokenize(notes[i].text);
    if (train_rows[i]) corpus.push_back(tokens[i]);
  }
  WordVectors vectors = train_sgns(corpus, config);
  EmbeddingMatrix m;
  m.backend_id = "word2vec";
  m.values.resize(static_cast<Eigen::Index>(notes.size()), vectors.dim());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    m.values.row(static_cast<Eigen::Index>(i)) = embed_note_mean(tokens[i], vectors).transpose();
    m.stay_ids.push_back(notes[i].stay_id);
    m.truncated.push_back(notes[i].truncated);
  }
  if (vectors_out) *vectors_out = std::move(vectors);
  return m;
}

}  // namespace steward
