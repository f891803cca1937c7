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

// Pseudo-note serialization, truncation and template handling.

#include <doctest.h>

#include <random>
#include <sstream>

#include "steward/ingest.hpp"
#include "steward/notes.hpp"
#include "steward/tokenize.hpp"
#include "support.hpp"

using namespace steward;
using steward::testing::bare_visit;
using steward::testing::field_values;
using steward::testing::full_visit;

namespace {

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("triage values are interpolated verbatim") {
  const auto seg = serialize_modality(full_visit(), Modality::kTriage);
  CHECK(contains(seg, "98.6"));
  CHECK(contains(seg, "101"));
  CHECK(contains(seg, "chest pain"));
}

TEST_CASE("empty modalities render their marker sentence") {
  const EDVisit v = bare_visit("s", "t");
  CHECK(serialize_modality(v, Modality::kMedrecon) ==
        "No medication reconciliation information recorded.");
  CHECK(serialize_modality(v, Modality::kTriage) == "No triage information recorded.");
  CHECK(serialize_modality(v, Modality::kPyxis) == "No pyxis information recorded.");
}

TEST_CASE("null fields vanish without filler") {
  EDVisit v = bare_visit("s", "t");
  TriageInfo t;
  t.heartrate = 77;
  v.triage = t;
  const auto seg = serialize_modality(v, Modality::kTriage);
  CHECK(seg == "At triage the patient had heart rate 77.");
  const auto note = serialize_visit(v);
  for (const char* junk : {"None", "null", "nan", "{"}) CHECK_FALSE(contains(note.text, junk));
}

TEST_CASE("pyxis dispensations follow chronological order") {
  const std::string arrival =
      "subject_id,stay_id,hadm_id,intime,outtime,age,gender,race,arrival_transport,disposition\n"
      "s,t,,2150-01-01 08:00,,,,,,\n";
  std::string pyxis = "subject_id,stay_id,charttime,med_rn,name,gsn\n";
  std::vector<std::pair<std::string, std::string>> rows = {
      {"2150-01-01 12:00", "Cefepime"}, {"2150-01-01 09:30", "Heparin"}, {"2150-01-01 10:15", "Insulin"}};
  for (const auto& [when, name] : rows) pyxis += "s,t," + when + ",," + name + ",\n";
  std::map<std::string, RawTable> tables;
  for (auto name : kModalityTables) {
    const auto& schema = schema_for(name);
    std::string header;
    for (const auto& c : schema.columns) header += (header.empty() ? "" : ",") + c.name;
    tables.emplace(std::string(name), parse_table(header + "\n", schema));
  }
  tables["arrival"] = parse_table(arrival, schema_for("arrival"));
  tables["pyxis"] = parse_table(pyxis, schema_for("pyxis"));
  const auto visits = assemble_visits(tables).visits;
  REQUIRE(visits.size() == 1);
  const auto seg = serialize_modality(visits[0], Modality::kPyxis);

  auto sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  std::size_t last = 0;
  for (const auto& [when, name] : sorted) {
    const auto pos = seg.find(name);
    REQUIRE(pos != std::string::npos);
    CHECK(pos >= last);
    last = pos;
  }
}

TEST_CASE("arrival-only visit is the arrival segment plus five markers") {
  const EDVisit v = bare_visit("s9", "t9");
  const auto note = serialize_visit(v);
  std::string want = serialize_modality(v, Modality::kArrival);
  for (auto m : {Modality::kTriage, Modality::kMedrecon, Modality::kVitals, Modality::kDiagnoses,
                 Modality::kPyxis}) {
    want += " " + TemplateSet::builtin().at(m).empty;
  }
  CHECK(note.text == want);
  CHECK_FALSE(note.truncated);
}

TEST_CASE("segments tile the note in the fixed modality order") {
  const auto note = serialize_visit(full_visit());
  REQUIRE(note.segments.size() == 6);
  std::size_t expect_start = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(note.segments[i].modality == kModalityOrder[i]);
    CHECK(note.segments[i].start == expect_start);
    expect_start = note.segments[i].end + 1;
  }
  CHECK(note.segments.back().end == note.text.size());
  CHECK(note.token_count == count_tokens(note.text));
  CHECK(serialize_visit(full_visit()).text == note.text);
}

TEST_CASE("every non-null field value appears in the fixture note") {
  const EDVisit v = full_visit();
  const auto note = serialize_visit(v);
  for (const auto& value : field_values(v)) {
    INFO(value);
    CHECK(contains(note.text, value));
  }
}

TEST_CASE("truncation keeps whole tokens from the head") {
  const auto note = serialize_visit(full_visit());
  REQUIRE(note.token_count < 512);
  const auto same = truncate_to_budget(note, 512);
  CHECK(same.text == note.text);
  CHECK_FALSE(same.truncated);

  const auto one = truncate_to_budget(note, 1);
  CHECK(one.truncated);
  CHECK(tokenize(one.text) == std::vector<std::string>{tokenize(note.text).front()});
  CHECK(one.token_count == 1);

  CHECK_THROWS_AS(truncate_to_budget(note, 0), ConfigError);
}

TEST_CASE("truncating an 800-token note to 512 is idempotent") {
  EDVisit v = full_visit();
  std::mt19937_64 rng(2);
  while (serialize_visit(v).token_count < 800) {
    v.pyxis.push_back({steward::testing::at(2, 1), "Drug" + std::to_string(rng() % 1000),
                       std::nullopt, std::nullopt});
  }
  const auto note = serialize_visit(v);
  const auto cut = truncate_to_budget(note, 512);
  CHECK(cut.truncated);
  CHECK(count_tokens(cut.text) == 512);
  CHECK(cut.token_count == 512);
  CHECK(note.text.substr(0, cut.text.size()) == cut.text);
  const auto twice = truncate_to_budget(cut, 512);
  CHECK(twice.text == cut.text);
  CHECK(twice.truncated);
  // Later modalities go first.
  CHECK(cut.segments.front().modality == Modality::kArrival);
  CHECK(cut.segments.back().end == cut.text.size());
}

TEST_CASE("notes round-trip through JSON lines") {
  std::vector<PseudoNote> notes = {serialize_visit(full_visit()),
                                   truncate_to_budget(serialize_visit(bare_visit("a", "b")), 3)};
  std::stringstream io;
  write_notes_jsonl(io, notes);
  const auto back = read_notes_jsonl(io);
  REQUIRE(back.size() == 2);
  CHECK(back[0].text == notes[0].text);
  CHECK(back[1].truncated);
  CHECK(back[1].stay_id == "b");
}

TEST_CASE("template text round-trips and rejects unknown placeholders") {
  for (auto m : kModalityOrder) {
    const auto& t = TemplateSet::builtin().at(m);
    const auto again = ModalityTemplate::parse(t.to_text(), m);
    CHECK(again.to_text() == t.to_text());
  }
  CHECK_THROWS_AS(ModalityTemplate::parse("fragment = {nonsense}\n", Modality::kTriage), ConfigError);
  CHECK_THROWS_AS(ModalityTemplate::parse("colour = blue\n", Modality::kTriage), ConfigError);

  const auto custom = ModalityTemplate::parse(
      "# comment\nlead = Vitals:\nfragment = HR={heartrate}\nrow_sep = \"; \"\nempty = none\n",
      Modality::kVitals);
  EDVisit v = full_visit();
  TemplateSet set = TemplateSet::builtin();
  set.at(Modality::kVitals) = custom;
  CHECK(serialize_modality(v, Modality::kVitals, set) == "Vitals: HR=104; HR=88.");
}

TEST_CASE("shipped template files match the built-in wording") {
  const auto loaded = TemplateSet::load_dir(STEWARD_TEMPLATES_DIR);
  for (auto m : kModalityOrder) {
    CHECK(loaded.at(m).to_text() == TemplateSet::builtin().at(m).to_text());
  }
  steward::testing::TempDir dir;
  TemplateSet::builtin().save_dir(dir.str());
  const auto reloaded = TemplateSet::load_dir(dir.str());
  CHECK(serialize_visit(full_visit(), reloaded).text == serialize_visit(full_visit()).text);
}

TEST_CASE("template tokens cover the fixed wording only") {
  const auto tokens = template_tokens();
  CHECK(tokens.count("triage"));
  CHECK(tokens.count("recorded"));
  CHECK_FALSE(tokens.count("heartrate"));
  CHECK_FALSE(tokens.count("chiefcomplaint"));
}
