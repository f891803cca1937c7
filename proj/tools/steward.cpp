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

// Command-line entry point: one subcommand per pipeline stage plus `all`.
// Exit status 0 on success, 1 when a stage fails (after a single-line
// error tail on stderr), 2 on usage or configuration errors.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steward/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string input;
  std::string out;
  std::string representation;
  std::string templates;
  std::size_t patients = 0;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "TOML-style config file or a stage manifest.json");
  cmd->add_option("--set", f.sets, "Override one setting, section.key=value (repeatable)");
  cmd->add_option("--input", f.input, "Directory holding the seven source tables");
  cmd->add_option("--out", f.out, "Output directory (default steward-out)");
  cmd->add_option("--representation", f.representation,
                  "tabular, bow, word2vec or remote:<model_id>");
  cmd->add_option("--templates", f.templates, "Directory of <modality>.tmpl files");
  cmd->add_option("--patients", f.patients, "Synthetic patient count");
  cmd->add_option("--seed", f.seed, "Synthetic generator seed");
  cmd->add_option("--budget", f.budget, "Token budget per note (0 = none)");
}

// Config file first, then --set in order, then the dedicated flags.
steward::RunConfig build_config(const CLI::App& cmd, const Flags& f) {
  steward::RunConfig c;
  if (!f.config.empty()) c.apply_file(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw steward::ConfigError("--set expects key=value, got " + kv);
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd.count("--input")) c.input_dir = f.input;
  if (cmd.count("--out")) c.output_dir = f.out;
  if (cmd.count("--representation")) c.representation = f.representation;
  if (cmd.count("--templates")) c.templates_dir = f.templates;
  if (cmd.count("--patients")) c.synth_patients = f.patients;
  if (cmd.count("--seed")) c.synth_seed = f.seed;
  if (cmd.count("--budget")) c.token_budget = f.budget;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-note antibiotic susceptibility pipeline"};
  app.require_subcommand(1);
  Flags flags;
  struct Entry {
    CLI::App* cmd;
    std::string name;
  };
  std::vector<Entry> entries;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate synthetic source tables with a planted signal"},
      {"ingest", "Assemble visits, extract labels, apply inclusion and split"},
      {"serialize", "Render one pseudo-note per visit"},
      {"embed", "Embed notes (or featurize tables) for one representation"},
      {"train", "Fit one boosted forest per antibiotic"},
      {"evaluate", "Score test rows with bootstrap confidence intervals"},
      {"cluster", "Cluster embeddings and rank cluster terms"},
      {"report", "Merge metrics across representations and draw curves"},
      {"all", "Run every stage in order (synth only without --input)"},
  };
  for (const auto& [name, help] : commands) {
    auto* cmd = app.add_subcommand(name, help);
    add_flags(cmd, flags);
    entries.push_back({cmd, name});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    const CLI::App* scope = &app;
    for (const auto& entry : entries) {
      if (entry.cmd->parsed()) scope = entry.cmd;
    }
    std::cerr << scope->help() << "\n" << e.what() << "\n";
    return 2;
  }

  const Entry* chosen = nullptr;
  for (const auto& e : entries) {
    if (e.cmd->parsed()) chosen = &e;
  }
  steward::RunConfig config;
  try {
    config = build_config(*chosen->cmd, flags);
  } catch (const std::exception& e) {
    std::cerr << chosen->cmd->help() << "\n" << steward::error_tail(chosen->name, e) << "\n";
    return 2;
  }

  std::string stage = chosen->name;
  try {
    if (chosen->name == "all") {
      if (config.input_dir.empty()) {
        stage = "synth";
        steward::run_stage(steward::Stage::kSynth, config, std::cerr);
      }
      for (auto s : steward::kPipelineStages) {
        stage = std::string(steward::stage_name(s));
        steward::run_stage(s, config, std::cerr);
      }
    } else {
      steward::run_stage(*steward::parse_stage(chosen->name), config, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << steward::error_tail(stage, e) << "\n";
    return 1;
  }
  return 0;
}
