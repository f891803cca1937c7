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

#include "steward/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "steward/cluster.hpp"
#include "steward/csv.hpp"
#include "steward/plot.hpp"
#include "steward/remote.hpp"
#include "steward/synthgen.hpp"
#include "steward/tabfeat.hpp"
#include "steward/tokenize.hpp"

namespace steward {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kToolVersion = "0.1.0";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  if constexpr (std::is_same_v<T, std::string>) {
    return unquote(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    const auto l = to_lower(v);
    if (l == "true" || l == "1" || l == "yes") return true;
    if (l == "false" || l == "0" || l == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<T>(d);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
  } else {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<ordered_json(const RunConfig&)> get;  // empty: not fingerprinted
};

template <typename T, typename Access>
Field field(std::string key, Access access, bool fingerprinted = true) {
  Field f;
  f.key = key;
  f.set = [access, key](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(key, v); };
  if (fingerprinted) {
    f.get = [access](const RunConfig& c) {
      return ordered_json(access(const_cast<RunConfig&>(c)));
    };
  }
  return f;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::string v = trim(text);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    using C = RunConfig;
    t.push_back(field<std::string>("paths.input", [](C& c) -> auto& { return c.input_dir; }, false));
    t.push_back(field<std::string>("paths.output", [](C& c) -> auto& { return c.output_dir; }, false));
    t.push_back(field<std::string>("paths.templates", [](C& c) -> auto& { return c.templates_dir; }, false));

    t.push_back(field<std::string>("run.representation", [](C& c) -> auto& { return c.representation; }));
    t.push_back(field<std::size_t>("run.token_budget", [](C& c) -> auto& { return c.token_budget; }));

    t.push_back(field<std::size_t>("synth.patients", [](C& c) -> auto& { return c.synth_patients; }));
    t.push_back(field<std::uint64_t>("synth.seed", [](C& c) -> auto& { return c.synth_seed; }));
    t.push_back(field<bool>("synth.signal_in_codes", [](C& c) -> auto& { return c.synth_signal_in_codes; }));
    t.push_back(field<double>("synth.multi_visit_rate", [](C& c) -> auto& { return c.synth_multi_visit_rate; }));
    t.push_back(field<double>("synth.nonqualifying_rate", [](C& c) -> auto& { return c.synth_nonqualifying_rate; }));

    t.push_back(field<double>("cohort.test_fraction", [](C& c) -> auto& { return c.cohort.test_fraction; }));
    t.push_back(field<std::uint64_t>("cohort.seed", [](C& c) -> auto& { return c.cohort.split_seed; }));
    {
      Field f;
      f.key = "cohort.positive";
      f.set = [](C& c, const std::string& v) {
        const auto s = to_lower(unquote(trim(v)));
        if (s == "s" || s == "susceptible") {
          c.cohort.labels.positive = LabelPolarity::kSusceptible;
        } else if (s == "r" || s == "resistant") {
          c.cohort.labels.positive = LabelPolarity::kResistant;
        } else {
          throw ConfigError("cohort.positive: expected S or R, got '" + v + "'");
        }
      };
      f.get = [](const C& c) {
        return ordered_json(c.cohort.labels.positive == LabelPolarity::kSusceptible ? "S" : "R");
      };
      t.push_back(f);
    }
    t.push_back(field<bool>("cohort.intermediate_as_susceptible",
                            [](C& c) -> auto& { return c.cohort.labels.intermediate_as_susceptible; }));
    {
      Field f;
      f.key = "cohort.organisms";
      f.set = [](C& c, const std::string& v) {
        c.cohort.inclusion.organism_patterns = parse_list(v);
      };
      f.get = [](const C& c) { return ordered_json(c.cohort.inclusion.organism_patterns); };
      t.push_back(f);
    }

    t.push_back(field<int>("train.num_trees", [](C& c) -> auto& { return c.trainer.num_trees; }));
    t.push_back(field<double>("train.learning_rate", [](C& c) -> auto& { return c.trainer.learning_rate; }));
    t.push_back(field<int>("train.num_leaves", [](C& c) -> auto& { return c.trainer.num_leaves; }));
    t.push_back(field<int>("train.min_samples_leaf", [](C& c) -> auto& { return c.trainer.min_samples_leaf; }));
    t.push_back(field<double>("train.l2_lambda", [](C& c) -> auto& { return c.trainer.l2_lambda; }));
    t.push_back(field<int>("train.max_bins", [](C& c) -> auto& { return c.trainer.max_bins; }));
    t.push_back(field<double>("train.feature_fraction", [](C& c) -> auto& { return c.trainer.feature_fraction; }));
    t.push_back(field<std::uint64_t>("train.seed", [](C& c) -> auto& { return c.trainer.seed; }));

    t.push_back(field<int>("eval.n_boot", [](C& c) -> auto& { return c.bootstrap.n_resamples; }));
    t.push_back(field<double>("eval.level", [](C& c) -> auto& { return c.bootstrap.level; }));
    t.push_back(field<std::uint64_t>("eval.seed", [](C& c) -> auto& { return c.bootstrap.seed; }));
    t.push_back(field<double>("eval.threshold", [](C& c) -> auto& { return c.bootstrap.threshold; }));

    t.push_back(field<int>("cluster.target_dim", [](C& c) -> auto& { return c.cluster_target_dim; }));
    t.push_back(field<int>("cluster.k_min", [](C& c) -> auto& { return c.cluster_k_min; }));
    t.push_back(field<int>("cluster.k_max", [](C& c) -> auto& { return c.cluster_k_max; }));
    t.push_back(field<int>("cluster.restarts", [](C& c) -> auto& { return c.cluster_restarts; }));
    t.push_back(field<std::uint64_t>("cluster.seed", [](C& c) -> auto& { return c.cluster_seed; }));
    t.push_back(field<std::size_t>("cluster.top_n", [](C& c) -> auto& { return c.cluster_top_n; }));
    t.push_back(field<std::size_t>("cluster.max_similarity_rows",
                                   [](C& c) -> auto& { return c.cluster_max_similarity_rows; }));

    t.push_back(field<int>("embed.dim", [](C& c) -> auto& { return c.sgns.dim; }));
    t.push_back(field<int>("embed.window", [](C& c) -> auto& { return c.sgns.window; }));
    t.push_back(field<int>("embed.negatives", [](C& c) -> auto& { return c.sgns.negatives; }));
    t.push_back(field<int>("embed.min_count", [](C& c) -> auto& { return c.sgns.min_count; }));
    t.push_back(field<double>("embed.subsample", [](C& c) -> auto& { return c.sgns.subsample; }));
    t.push_back(field<int>("embed.epochs", [](C& c) -> auto& { return c.sgns.epochs; }));
    t.push_back(field<double>("embed.learning_rate", [](C& c) -> auto& { return c.sgns.learning_rate; }));
    t.push_back(field<std::uint64_t>("embed.seed", [](C& c) -> auto& { return c.sgns.seed; }));
    t.push_back(field<unsigned>("embed.sgns_threads", [](C& c) -> auto& { return c.sgns.threads; }));
    t.push_back(field<std::size_t>("embed.bow_buckets", [](C& c) -> auto& { return c.bow_buckets; }));
    t.push_back(field<std::size_t>("embed.tabular_cap", [](C& c) -> auto& { return c.tabular_cardinality_cap; }));

    t.push_back(field<std::string>("remote.endpoint", [](C& c) -> auto& { return c.remote_endpoint; }));
    t.push_back(field<std::size_t>("remote.batch_size", [](C& c) -> auto& { return c.remote_batch_size; }));
    t.push_back(field<unsigned>("remote.max_concurrency", [](C& c) -> auto& { return c.remote_max_concurrency; }));
    t.push_back(field<int>("remote.max_attempts", [](C& c) -> auto& { return c.remote_max_attempts; }));
    t.push_back(field<int>("remote.timeout_seconds", [](C& c) -> auto& { return c.remote_timeout_seconds; }));
    return t;
  }();
  return table;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void require_exists(const fs::path& path, std::string_view produced_by) {
  if (!fs::exists(path)) {
    throw IoError(path.string() + " not found; run the " + std::string(produced_by) +
                  " stage first");
  }
}

// Collects hashes of everything a stage read and wrote and emits the
// stage's manifest.json.
class StageRecord {
 public:
  StageRecord(Stage stage, const RunConfig& config, fs::path root)
      : stage_(stage), config_(config), root_(std::move(root)) {}

  void input(const fs::path& p) { inputs_[label(p)] = hash_file(p); }
  void output(const fs::path& p) { outputs_[label(p)] = hash_file(p); }
  void set(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  void write(const fs::path& dir, std::optional<std::uint64_t> seed) const {
    ordered_json m;
    m["stage"] = stage_name(stage_);
    m["config_fingerprint"] = config_.fingerprint();
    m["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
    m["config"] = config_.to_json();
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    m["versions"] = tool_versions();
    write_json(dir / "manifest.json", m);
  }

 private:
  std::string label(const fs::path& p) const {
    const auto rel = fs::relative(p, root_);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return "external/" + p.filename().string();
  }
  static std::string hash_file(const fs::path& p) { return hex64(fnv1a64(read_text(p))); }

  Stage stage_;
  const RunConfig& config_;
  fs::path root_;
  ordered_json inputs_ = ordered_json::object();
  ordered_json outputs_ = ordered_json::object();
  ordered_json extra_ = ordered_json::object();
};

struct Layout {
  fs::path root;
  explicit Layout(const RunConfig& c) : root(c.output_dir) {}
  fs::path synth() const { return root / "synth"; }
  fs::path ingest() const { return root / "ingest"; }
  fs::path serialize() const { return root / "serialize"; }
  fs::path embed(const Representation& r) const { return root / "embed" / r.slug(); }
  fs::path train(const Representation& r) const { return root / "train" / r.slug(); }
  fs::path evaluate() const { return root / "evaluate"; }
  fs::path evaluate(const Representation& r) const { return evaluate() / r.slug(); }
  fs::path cluster(const Representation& r) const { return root / "cluster" / r.slug(); }
  fs::path report() const { return root / "report"; }
};

Cohort load_cohort(const Layout& layout, StageRecord& record) {
  const auto path = layout.ingest() / "cohort.json";
  require_exists(path, "ingest");
  record.input(path);
  return cohort_from_json(read_json(path));
}

std::vector<PseudoNote> load_notes(const Layout& layout, StageRecord& record) {
  const auto path = layout.serialize() / "notes.jsonl";
  require_exists(path, "serialize");
  record.input(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_notes_jsonl(in);
}

std::vector<std::string> canonical_stays(const Cohort& cohort) {
  std::vector<std::string> out;
  for (const auto& [stay, v] : cohort.visits) out.push_back(stay);
  return out;
}

// Offending entries are the first stay ids where the two orders differ.
void check_same_rows(const std::vector<std::string>& got, const std::vector<std::string>& want,
                     std::string_view what) {
  if (got == want) return;
  std::vector<std::string> offending;
  for (std::size_t i = 0; i < std::max(got.size(), want.size()) && offending.size() < 5; ++i) {
    const std::string a = i < got.size() ? got[i] : "(none)";
    const std::string b = i < want.size() ? want[i] : "(none)";
    if (a != b) offending.push_back(a + " vs " + b);
  }
  throw ValidationError(std::string(what) + " rows are out of step", std::move(offending));
}

void check_rows(const std::vector<std::string>& got, const Cohort& cohort, std::string_view what) {
  check_same_rows(got, canonical_stays(cohort), what);
}

EmbeddingMatrix load_embedding(const Layout& layout, const Representation& rep,
                               StageRecord& record) {
  const auto stem = layout.embed(rep) / "embedding";
  require_exists(stem.string() + ".bin", "embed");
  record.input(stem.string() + ".json");
  record.input(stem.string() + ".bin");
  return load_matrix(stem.string());
}

TemplateSet current_templates(const RunConfig& config) {
  return config.templates_dir.empty() ? TemplateSet::builtin()
                                      : TemplateSet::load_dir(config.templates_dir);
}

// ---------------------------------------------------------------------------
// Stages.

void stage_synth(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  StageRecord record(Stage::kSynth, config, layout.root);
  SynthConfig sc = SynthConfig::defaults();
  sc.n_patients = config.synth_patients;
  sc.seed = config.synth_seed;
  sc.signal_in_codes = config.synth_signal_in_codes;
  sc.multi_visit_rate = config.synth_multi_visit_rate;
  sc.nonqualifying_rate = config.synth_nonqualifying_rate;
  sc.validate();
  const auto data = generate_tables(sc);
  const auto dir = make_dir(layout.synth());
  for (const auto& [name, body] : data.tables) {
    write_text(dir / (name + ".csv"), body);
    record.output(dir / (name + ".csv"));
  }
  write_json(dir / "truth.json", data.manifest);
  record.output(dir / "truth.json");
  record.write(dir, config.synth_seed);
  log << "synth: " << sc.n_patients << " patients, " << data.manifest["n_stays"].get<std::size_t>()
      << " stays -> " << dir.string() << "\n";
}

void stage_ingest(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  StageRecord record(Stage::kIngest, config, layout.root);
  const fs::path input = config.input_dir.empty() ? layout.synth() : fs::path(config.input_dir);
  if (!fs::is_directory(input)) throw IoError("input directory " + input.string() + " not found");
  for (auto name : kModalityTables) record.input(input / (std::string(name) + ".csv"));
  record.input(input / (std::string(kMicroTable) + ".csv"));

  IngestSummary summary;
  const Cohort cohort = build_cohort(load_source_dir(input.string()), config.cohort, &summary);
  const auto dir = make_dir(layout.ingest());
  write_json(dir / "cohort.json", to_json(cohort));
  record.output(dir / "cohort.json");

  std::ostringstream prev;
  csv::write_row(prev, {"antibiotic", "train", "test", "prevalence_pct"});
  for (const auto& row : prevalence_table(cohort)) {
    csv::write_row(prev, {std::string(antibiotic_name(row.antibiotic)),
                          std::to_string(row.train_count), std::to_string(row.test_count),
                          format_number(row.prevalence_pct)});
  }
  write_text(dir / "prevalence.csv", prev.str());
  record.output(dir / "prevalence.csv");

  std::ostringstream rej;
  csv::write_row(rej, {"table", "row", "stay_id", "reason"});
  for (const auto& r : summary.rejected) {
    csv::write_row(rej, {r.table, std::to_string(r.row), r.stay_id, r.reason});
  }
  write_text(dir / "rejected.csv", rej.str());
  record.output(dir / "rejected.csv");

  std::size_t train_subjects = 0;
  for (const auto& [s, p] : cohort.split) train_subjects += p == Partition::kTrain ? 1 : 0;
  record.set("summary", {{"visits_assembled", summary.visits_assembled},
                         {"visits_kept", summary.visits_kept},
                         {"label_rows", summary.label_rows},
                         {"label_rows_kept", summary.label_rows_kept},
                         {"duplicate_labels", summary.duplicate_labels},
                         {"unknown_antibiotics", summary.unknown_antibiotics},
                         {"rejected_rows", summary.rejected.size()},
                         {"train_subjects", train_subjects},
                         {"test_subjects", cohort.split.size() - train_subjects}});
  record.write(dir, config.cohort.split_seed);
  log << "ingest: " << summary.visits_kept << " of " << summary.visits_assembled
      << " visits kept, " << summary.label_rows_kept << " label rows\n";
}

void stage_serialize(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  StageRecord record(Stage::kSerialize, config, layout.root);
  const Cohort cohort = load_cohort(layout, record);
  const TemplateSet templates = current_templates(config);
  const auto notes = serialize_cohort(cohort, templates, config.token_budget, thread_cap());
  const auto dir = make_dir(layout.serialize());
  templates.save_dir((dir / "templates").string());
  for (auto m : kModalityOrder) record.output(dir / "templates" / (std::string(modality_name(m)) + ".tmpl"));
  {
    std::ofstream out(dir / "notes.jsonl", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "notes.jsonl").string());
    write_notes_jsonl(out, notes);
    if (!out) throw IoError("write failed for notes.jsonl");
  }
  record.output(dir / "notes.jsonl");
  std::size_t truncated = 0, tokens = 0;
  for (const auto& n : notes) {
    truncated += n.truncated ? 1 : 0;
    tokens += n.token_count;
  }
  record.set("summary", {{"notes", notes.size()}, {"truncated", truncated}, {"tokens", tokens}});
  record.write(dir, std::nullopt);
  log << "serialize: " << notes.size() << " notes, " << truncated << " truncated\n";
}

void stage_embed(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  const Representation rep = config.parsed_representation();
  StageRecord record(Stage::kEmbed, config, layout.root);
  const Cohort cohort = load_cohort(layout, record);
  const auto dir = make_dir(layout.embed(rep));
  const auto stem = (dir / "embedding").string();
  std::optional<std::uint64_t> seed;
  EmbeddingMatrix m;
  ordered_json extra = ordered_json::object();
  if (rep.kind == RepresentationKind::kTabular) {
    const FeatureFrame frame = featurize_tabular(cohort, {config.tabular_cardinality_cap});
    m = frame.to_matrix();
    extra["columns"] = frame.names;
    extra["sources"] = frame.sources;
  } else {
    const auto notes = load_notes(layout, record);
    std::vector<std::string> ids;
    for (const auto& n : notes) ids.push_back(n.stay_id);
    check_rows(ids, cohort, "notes");
    if (rep.kind == RepresentationKind::kBow) {
      m = embed_bow(notes, config.bow_buckets);
    } else if (rep.kind == RepresentationKind::kWord2vec) {
      WordVectors vectors;
      m = embed_word2vec(notes, training_rows(cohort), config.sgns, &vectors);
      save_word_vectors(vectors, (dir / "word_vectors.txt").string());
      record.output(dir / "word_vectors.txt");
      extra["vocabulary"] = vectors.vocab.size();
      seed = config.sgns.seed;
    } else {
      RemoteOptions opts;
      opts.endpoint = config.remote_endpoint;
      opts.model_id = rep.model_id;
      opts.batch_size = config.remote_batch_size;
      opts.max_concurrency = config.remote_max_concurrency;
      opts.max_attempts = config.remote_max_attempts;
      opts.timeout = std::chrono::seconds(config.remote_timeout_seconds);
      m = embed_remote(notes, opts);
    }
  }
  save_matrix(m, stem, extra);
  record.output(stem + ".json");
  record.output(stem + ".bin");
  record.set("representation", rep.name());
  record.set("summary", {{"rows", m.count()}, {"dimension", m.dimension()}});
  record.write(dir, seed);
  log << "embed: " << rep.name() << " " << m.count() << " x " << m.dimension() << "\n";
}

void stage_train(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  const Representation rep = config.parsed_representation();
  StageRecord record(Stage::kTrain, config, layout.root);
  const Cohort cohort = load_cohort(layout, record);
  const EmbeddingMatrix m = load_embedding(layout, rep, record);
  check_rows(m.stay_ids, cohort, "embedding");
  TrainConfig tc = config.trainer;
  tc.threads = thread_cap();
  const MultilabelModel model = fit_multilabel(m.values.cast<double>(), cohort, tc);
  const auto dir = make_dir(layout.train(rep));
  write_json(dir / "model.json", model.to_json());
  record.output(dir / "model.json");
  ordered_json skipped = ordered_json::object();
  for (const auto& [a, why] : model.skipped) skipped[std::string(antibiotic_name(a))] = why;
  record.set("representation", rep.name());
  record.set("summary", {{"models", model.models.size()}, {"skipped", skipped}});
  record.write(dir, config.trainer.seed);
  log << "train: " << rep.name() << " " << model.models.size() << " models, "
      << model.skipped.size() << " skipped\n";
}

void stage_evaluate(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  const Representation rep = config.parsed_representation();
  StageRecord record(Stage::kEvaluate, config, layout.root);
  const Cohort cohort = load_cohort(layout, record);
  const EmbeddingMatrix m = load_embedding(layout, rep, record);
  check_rows(m.stay_ids, cohort, "embedding");
  const auto model_path = layout.train(rep) / "model.json";
  require_exists(model_path, "train");
  record.input(model_path);
  const MultilabelModel model = MultilabelModel::from_json(read_json(model_path));

  EvalOptions opts;
  opts.bootstrap = config.bootstrap;
  opts.bootstrap.threads = thread_cap();
  opts.representation = rep.name();
  opts.config_fingerprint = config.fingerprint();
  const EvalResult result = evaluate_all(model, m.values.cast<double>(), cohort, opts);

  const auto dir = make_dir(layout.evaluate(rep));
  write_metrics_json(result.reports, (dir / "metrics.json").string());
  write_metrics_csv(result.reports, (dir / "metrics.csv").string());
  write_curves_csv(result.curves, (dir / "curves.csv").string());
  for (auto f : {"metrics.json", "metrics.csv", "curves.csv"}) record.output(dir / f);
  ordered_json skipped = ordered_json::object();
  for (const auto& [a, why] : result.skipped) skipped[std::string(antibiotic_name(a))] = why;
  record.set("representation", rep.name());
  record.set("summary", {{"reports", result.reports.size()}, {"skipped", skipped}});
  record.write(dir, config.bootstrap.seed);
  log << "evaluate: " << rep.name() << " " << result.reports.size() / 4 << " antibiotics scored\n";
}

void stage_cluster(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  const Representation rep = config.parsed_representation();
  StageRecord record(Stage::kCluster, config, layout.root);
  const EmbeddingMatrix m = load_embedding(layout, rep, record);
  const auto notes = load_notes(layout, record);
  std::vector<std::string> ids;
  for (const auto& n : notes) ids.push_back(n.stay_id);
  check_same_rows(ids, m.stay_ids, "notes and embedding");
  const auto tmpl_dir = layout.serialize() / "templates";
  for (auto mod : kModalityOrder) record.input(tmpl_dir / (std::string(modality_name(mod)) + ".tmpl"));
  const TemplateSet templates = TemplateSet::load_dir(tmpl_dir.string());

  // Missing tabular cells carry no direction; they sit at the origin.
  Eigen::MatrixXd x = m.values.cast<double>().unaryExpr([](double v) {
    return std::isfinite(v) ? v : 0.0;
  });
  const Eigen::MatrixXd points = x.cols() > config.cluster_target_dim
                                     ? pca(x, config.cluster_target_dim).reduced
                                     : x;
  KMeansOptions km;
  km.k_min = config.cluster_k_min;
  km.k_max = config.cluster_k_max;
  km.restarts = config.cluster_restarts;
  km.seed = config.cluster_seed;
  km.threads = thread_cap();
  ClusterResult result = cluster_kmeans(points, km);

  std::vector<std::vector<std::string>> docs;
  docs.reserve(notes.size());
  for (const auto& n : notes) docs.push_back(tokenize(n.text));
  CtfidfOptions ct;
  ct.top_n = config.cluster_top_n;
  ct.stop_tokens = template_tokens(templates);
  std::vector<std::string> warnings;
  if (result.k >= 2) {
    auto terms = ctfidf_terms(docs, result.assignments, result.k, ct);
    result.top_terms = std::move(terms.top_terms);
    warnings = std::move(terms.warnings);
  } else {
    warnings.push_back("single cluster; no term ranking");
  }

  // Thin evenly along the cluster ordering so every block keeps its share.
  std::vector<std::size_t> shown = result.ordering;
  const std::size_t cap = std::max<std::size_t>(config.cluster_max_similarity_rows, 1);
  if (shown.size() > cap) {
    std::vector<std::size_t> thinned;
    for (std::size_t i = 0; i < cap; ++i) thinned.push_back(shown[i * shown.size() / cap]);
    shown = std::move(thinned);
  }
  const Eigen::MatrixXd sim = similarity_matrix(x, shown);
  std::vector<int> shown_labels;
  for (auto r : shown) shown_labels.push_back(result.assignments[r]);
  const BlockStats blocks = block_stats(sim, shown_labels);

  const auto dir = make_dir(layout.cluster(rep));
  ordered_json cj = to_json(result, m.stay_ids);
  cj["warnings"] = warnings;
  cj["similarity_rows"] = shown.size();
  cj["within_block_similarity"] = blocks.within;
  cj["between_block_similarity"] = blocks.between;
  write_json(dir / "clusters.json", cj);
  write_similarity_csv(sim, (dir / "similarity.csv").string());
  write_similarity_svg(sim, shown_labels, (dir / "similarity.svg").string());
  for (auto f : {"clusters.json", "similarity.csv", "similarity.svg"}) record.output(dir / f);
  record.set("representation", rep.name());
  record.set("summary", {{"k", result.k},
                         {"silhouette", result.silhouette},
                         {"degenerate", result.degenerate},
                         {"sizes", result.sizes()}});
  record.write(dir, config.cluster_seed);
  log << "cluster: " << rep.name() << " k=" << result.k << " silhouette "
      << format_number(result.silhouette) << "\n";
}

void stage_report(const RunConfig& config, std::ostream& log) {
  const Layout layout(config);
  StageRecord record(Stage::kReport, config, layout.root);
  std::vector<MetricReport> reports;
  std::vector<CurveSet> curves;
  if (fs::is_directory(layout.evaluate())) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(layout.evaluate())) {
      if (e.is_directory() && fs::exists(e.path() / "metrics.json")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      record.input(d / "metrics.json");
      auto r = read_metrics_json((d / "metrics.json").string());
      reports.insert(reports.end(), r.begin(), r.end());
      if (fs::exists(d / "curves.csv")) {
        record.input(d / "curves.csv");
        auto c = read_curves_csv((d / "curves.csv").string());
        curves.insert(curves.end(), c.begin(), c.end());
      }
    }
  }
  const auto dir = make_dir(layout.report());
  write_metrics_json(reports, (dir / "metrics.json").string());
  write_metrics_csv(reports, (dir / "metrics.csv").string());
  write_curves_csv(curves, (dir / "curves.csv").string());
  for (auto f : {"metrics.json", "metrics.csv", "curves.csv"}) record.output(dir / f);
  const auto prevalence = layout.ingest() / "prevalence.csv";
  if (fs::exists(prevalence)) {
    record.input(prevalence);
    write_text(dir / "prevalence.csv", read_text(prevalence));
    record.output(dir / "prevalence.csv");
  }
  const auto plots = emit_plots(curves, reports, dir.string());
  for (const auto& p : plots) record.output(p);
  record.set("summary", {{"reports", reports.size()}, {"plots", plots.size()}});
  record.write(dir, std::nullopt);
  log << "report: " << reports.size() << " metric rows, " << plots.size() << " plots\n";
}

}  // namespace

// ---------------------------------------------------------------------------

Representation Representation::parse(std::string_view text) {
  Representation r;
  if (text == "tabular") {
    r.kind = RepresentationKind::kTabular;
  } else if (text == "bow") {
    r.kind = RepresentationKind::kBow;
  } else if (text == "word2vec") {
    r.kind = RepresentationKind::kWord2vec;
  } else if (text.starts_with("remote:") && text.size() > 7) {
    r.kind = RepresentationKind::kRemote;
    r.model_id = std::string(text.substr(7));
  } else {
    throw ConfigError("unknown representation '" + std::string(text) +
                      "' (expected tabular, bow, word2vec or remote:<model_id>)");
  }
  return r;
}

std::string Representation::name() const {
  switch (kind) {
    case RepresentationKind::kTabular: return "tabular";
    case RepresentationKind::kBow: return "bow";
    case RepresentationKind::kWord2vec: return "word2vec";
    case RepresentationKind::kRemote: return "remote:" + model_id;
  }
  return {};
}

std::string Representation::slug() const {
  std::string s = name();
  for (char& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown setting '" + key + "'");
}

void RunConfig::apply_text(std::string_view text) {
  std::string section = "run";
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    // A '#' inside quotes is part of the value.
    if (hash != std::string::npos && std::count(line.begin(), line.begin() + hash, '"') % 2 == 0) {
      line.erase(hash);
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    set(key.find('.') == std::string::npos ? section + "." + key : key, trim(t.substr(eq + 1)));
  }
}

void RunConfig::apply_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path + " not found");
  if (fs::path(path).extension() == ".json") {
    const auto j = read_json(path);
    if (!j.contains("config") || !j["config"].is_object()) {
      throw ConfigError(path + " has no config object");
    }
    for (const auto& [k, v] : j["config"].items()) {
      if (v.is_string()) {
        set(k, v.get<std::string>());
      } else if (v.is_array()) {
        std::string joined;
        for (const auto& item : v) joined += (joined.empty() ? "" : ",") + item.get<std::string>();
        set(k, joined);
      } else {
        set(k, v.dump());
      }
    }
    return;
  }
  apply_text(read_text(path));
}

ordered_json RunConfig::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& f : fields()) {
    if (f.get) j[f.key] = f.get(*this);
  }
  return j;
}

std::string RunConfig::fingerprint() const { return hex64(fnv1a64(to_json().dump())); }

void RunConfig::validate() const {
  parsed_representation();
  trainer.validate();
  if (!(cohort.test_fraction > 0.0 && cohort.test_fraction < 1.0)) {
    throw ConfigError("cohort.test_fraction must lie in (0, 1)");
  }
  if (cohort.inclusion.organism_patterns.empty()) throw ConfigError("cohort.organisms is empty");
  if (bootstrap.n_resamples < 1) throw ConfigError("eval.n_boot must be positive");
  if (!(bootstrap.level > 0.0 && bootstrap.level < 1.0)) {
    throw ConfigError("eval.level must lie in (0, 1)");
  }
  if (cluster_target_dim < 1) throw ConfigError("cluster.target_dim must be positive");
  if (cluster_k_min < 2 || cluster_k_max < cluster_k_min) {
    throw ConfigError("cluster k range must satisfy 2 <= k_min <= k_max");
  }
  if (cluster_restarts < 1) throw ConfigError("cluster.restarts must be positive");
  if (cluster_top_n < 1) throw ConfigError("cluster.top_n must be positive");
  if (sgns.dim < 1 || sgns.window < 1 || sgns.epochs < 1 || sgns.min_count < 1) {
    throw ConfigError("embed dim, window, epochs and min_count must be positive");
  }
  if (bow_buckets < 1) throw ConfigError("embed.bow_buckets must be positive");
  if (tabular_cardinality_cap < 1) throw ConfigError("embed.tabular_cap must be positive");
  if (remote_batch_size < 1 || remote_max_concurrency < 1 || remote_max_attempts < 1 ||
      remote_timeout_seconds < 1) {
    throw ConfigError("remote batch size, concurrency, attempts and timeout must be positive");
  }
  if (!input_dir.empty() && !fs::is_directory(input_dir)) {
    throw ConfigError("input directory " + input_dir + " not found");
  }
  if (!templates_dir.empty() && !fs::is_directory(templates_dir)) {
    throw ConfigError("templates directory " + templates_dir + " not found");
  }
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kSynth: return "synth";
    case Stage::kIngest: return "ingest";
    case Stage::kSerialize: return "serialize";
    case Stage::kEmbed: return "embed";
    case Stage::kTrain: return "train";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kCluster: return "cluster";
    case Stage::kReport: return "report";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : {Stage::kSynth, Stage::kIngest, Stage::kSerialize, Stage::kEmbed, Stage::kTrain,
                 Stage::kEvaluate, Stage::kCluster, Stage::kReport}) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

void run_stage(Stage stage, const RunConfig& config, std::ostream& log) {
  switch (stage) {
    case Stage::kSynth: return stage_synth(config, log);
    case Stage::kIngest: return stage_ingest(config, log);
    case Stage::kSerialize: return stage_serialize(config, log);
    case Stage::kEmbed: return stage_embed(config, log);
    case Stage::kTrain: return stage_train(config, log);
    case Stage::kEvaluate: return stage_evaluate(config, log);
    case Stage::kCluster: return stage_cluster(config, log);
    case Stage::kReport: return stage_report(config, log);
  }
}

void run_all(const RunConfig& config, std::ostream& log) {
  if (config.input_dir.empty()) run_stage(Stage::kSynth, config, log);
  for (auto s : kPipelineStages) run_stage(s, config, log);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const SingleClassError*>(&e)) return "single_class";
  if (dynamic_cast<const SchemaError*>(&e)) return "schema";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const UndefinedMetric*>(&e)) return "undefined_metric";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal";
}

std::string error_tail(std::string_view stage, const std::exception& e) {
  std::string msg;
  for (char c : std::string_view(e.what())) {
    if (c == '\n' || c == '\r') {
      msg += ' ';
    } else if (c == '"' || c == '\\') {
      msg += '\\';
      msg += c;
    } else {
      msg += c;
    }
  }
  return "steward-error stage=" + std::string(stage) + " kind=" + error_kind(e) + " message=\"" +
         msg + "\"";
}

ordered_json tool_versions() {
  return {{"steward", kToolVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

}  // namespace steward
