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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steward/embed.hpp"
#include "steward/eval.hpp"
#include "steward/gbdt.hpp"
#include "steward/pipeline.hpp"

namespace steward {

// Stage orchestration behind the `steward` executable. Every stage reads
// the artifacts of earlier stages from fixed locations under the output
// directory and writes its own directory plus a manifest.json.

enum class RepresentationKind : std::uint8_t { kTabular, kBow, kWord2vec, kRemote };

struct Representation {
  RepresentationKind kind = RepresentationKind::kWord2vec;
  std::string model_id;  // remote only

  // Accepts tabular, bow, word2vec and remote:<model_id>; ConfigError otherwise.
  static Representation parse(std::string_view text);
  std::string name() const;  // round-trips through parse
  std::string slug() const;  // directory-safe form of name()
};

struct RunConfig {
  // Paths are not part of the fingerprint: moving a run does not change it.
  std::string input_dir;  // source tables; empty means <output>/synth
  std::string output_dir = "steward-out";
  std::string templates_dir;  // empty means the built-in templates

  std::string representation = "word2vec";
  std::size_t token_budget = 0;  // 0 = untruncated notes

  std::size_t synth_patients = 500;
  std::uint64_t synth_seed = 7;
  bool synth_signal_in_codes = true;
  double synth_multi_visit_rate = 0.25;
  double synth_nonqualifying_rate = 0.1;

  CohortOptions cohort;
  TrainConfig trainer;
  BootstrapOptions bootstrap;

  int cluster_target_dim = 10;
  int cluster_k_min = 2;
  int cluster_k_max = 10;
  int cluster_restarts = 10;
  std::uint64_t cluster_seed = 0;
  std::size_t cluster_top_n = 10;
  std::size_t cluster_max_similarity_rows = 2000;  // evenly thinned beyond this

  SgnsConfig sgns;
  std::size_t bow_buckets = 256;
  std::size_t tabular_cardinality_cap = 64;

  std::string remote_endpoint = "http://127.0.0.1:8080";
  std::size_t remote_batch_size = 128;
  unsigned remote_max_concurrency = 2;
  int remote_max_attempts = 5;
  int remote_timeout_seconds = 120;

  // Sets "section.key" from its text form. ConfigError on unknown keys or
  // unparsable values.
  void set(const std::string& key, const std::string& value);
  // TOML-style text: [section] headers, key = value lines, '#' comments.
  void apply_text(std::string_view text);
  // A .json path is read as a stage manifest and its "config" applied;
  // anything else as TOML-style text.
  void apply_file(const std::string& path);

  // Flat {"section.key": value} view of every fingerprinted setting.
  nlohmann::ordered_json to_json() const;
  std::string fingerprint() const;
  // Throws ConfigError when any setting is out of range.
  void validate() const;
  Representation parsed_representation() const { return Representation::parse(representation); }
};

enum class Stage : std::uint8_t {
  kSynth, kIngest, kSerialize, kEmbed, kTrain, kEvaluate, kCluster, kReport
};

inline constexpr Stage kPipelineStages[] = {Stage::kIngest, Stage::kSerialize, Stage::kEmbed,
                                            Stage::kTrain,  Stage::kEvaluate,  Stage::kCluster,
                                            Stage::kReport};

std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);

// Runs one stage. Progress lines go to `log`. Throws steward::Error.
void run_stage(Stage stage, const RunConfig& config, std::ostream& log);

// synth (only when no input directory is set) followed by every pipeline
// stage; the artifacts equal those of running the stages one by one.
void run_all(const RunConfig& config, std::ostream& log);

// Short machine-readable category of an exception: schema, io, protocol,
// config, undefined_metric, validation, single_class, error or internal.
std::string error_kind(const std::exception& e);

// Single line: steward-error stage=<stage> kind=<kind> message="<text>".
std::string error_tail(std::string_view stage, const std::exception& e);

// Versions of this tool and of the libraries that shape its numbers.
nlohmann::ordered_json tool_versions();

}  // namespace steward
