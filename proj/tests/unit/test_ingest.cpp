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

// Schema-typed table loading, visit assembly and microbiology extraction.

#include <doctest.h>

#include <map>
#include <random>

#include "steward/ingest.hpp"
#include "support.hpp"

using namespace steward;
using steward::testing::TempDir;

namespace {

const std::map<std::string, std::string> kHeaders = {
    {"arrival", "subject_id,stay_id,hadm_id,intime,outtime,age,gender,race,arrival_transport,disposition\n"},
    {"triage", "subject_id,stay_id,temperature,heartrate,resprate,o2sat,sbp,dbp,pain,acuity,chiefcomplaint\n"},
    {"medrecon", "subject_id,stay_id,charttime,name,gsn,etcdescription\n"},
    {"vitals", "subject_id,stay_id,charttime,temperature,heartrate,resprate,o2sat,sbp,dbp,rhythm,pain\n"},
    {"diagnosis", "subject_id,stay_id,seq_num,icd_code,icd_version,icd_title\n"},
    {"pyxis", "subject_id,stay_id,charttime,med_rn,name,gsn\n"},
    {"micro_susceptibility",
     "subject_id,hadm_id,stay_id,collected_at,specimen_source,organism_name,antibiotic,interpretation\n"},
};

std::map<std::string, RawTable> parse_all(std::map<std::string, std::string> bodies) {
  std::map<std::string, RawTable> out;
  for (const auto& [name, header] : kHeaders) {
    out.emplace(name, parse_table(header + bodies[name], schema_for(name)));
  }
  return out;
}

std::string arrival_row(const std::string& subject, const std::string& stay) {
  return subject + "," + stay + ",h" + stay + ",2150-01-01 08:00:00,,50,F,WHITE,WALK IN,HOME\n";
}

std::string vitals_row(const std::string& subject, const std::string& stay, const std::string& time,
                       const std::string& hr) {
  return subject + "," + stay + "," + time + ",," + hr + ",,,,,,\n";
}

}  // namespace

TEST_CASE("header-only file yields an empty table") {
  const auto t = parse_table(kHeaders.at("vitals"), schema_for("vitals"));
  CHECK(t.rows.empty());
}

TEST_CASE("float cells parse to doubles") {
  const auto t = parse_table(kHeaders.at("vitals") + vitals_row("s", "1", "2150-01-01 09:00", "88") +
                                 "s,1,2150-01-01 10:00,98.6,,,,,,,\n",
                             schema_for("vitals"));
  REQUIRE(t.rows.size() == 2);
  CHECK(*t.number(1, t.column("temperature")) == 98.6);
  CHECK(t.is_null(1, t.column("heartrate")));
  CHECK(*t.time(0, t.column("charttime")) == *Timestamp::parse("2150-01-01 09:00"));
}

TEST_CASE("unparsable integer cell cites its row") {
  std::string body = kHeaders.at("arrival");
  for (int i = 1; i <= 11; ++i) body += arrival_row("s" + std::to_string(i), std::to_string(i));
  body += "s12,12,h12,2150-01-01 08:00:00,,abc,F,WHITE,WALK IN,HOME\n";
  try {
    parse_table(body, schema_for("arrival"));
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 12") != std::string::npos);
    CHECK(what.find("age") != std::string::npos);
  }
}

TEST_CASE("header problems are schema errors") {
  CHECK_THROWS_WITH_AS(parse_table("subject_id,charttime\n", schema_for("vitals")),
                       doctest::Contains("stay_id"), SchemaError);
  CHECK_THROWS_WITH_AS(parse_table("subject_id,stay_id,stay_id,charttime\n", schema_for("vitals")),
                       doctest::Contains("duplicate"), SchemaError);
  CHECK_THROWS_AS(parse_table("", schema_for("vitals")), SchemaError);
  CHECK_THROWS_AS(parse_table(kHeaders.at("vitals") + "s,1,,,,,,,,,\n", schema_for("vitals")),
                  SchemaError);
}

TEST_CASE("absent nullable columns read as null and extra columns are counted") {
  const auto t = parse_table("subject_id,stay_id,charttime,extra\ns,1,2150-01-01,zzz\n",
                             schema_for("vitals"));
  REQUIRE(t.rows.size() == 1);
  CHECK(t.ignored_columns == 1);
  CHECK(t.is_null(0, t.column("rhythm")));
}

TEST_CASE("schemas declare unique columns and a key") {
  for (const auto& [name, schema] : standard_schemas()) {
    CHECK_NOTHROW(schema.validate());
    CHECK(schema.table_name == name);
  }
  TableSchema bad{"bad", {{"x", ColumnKind::kString, false}}};
  CHECK_THROWS_AS(bad.validate(), SchemaError);
  TableSchema dup{"dup", {{"stay_id", ColumnKind::kString, false}, {"stay_id", ColumnKind::kString, false}}};
  CHECK_THROWS_AS(dup.validate(), SchemaError);
}

TEST_CASE("three vitals rows attach to their visit") {
  const auto tables = parse_all({{"arrival", arrival_row("s1", "1")},
                                 {"vitals", vitals_row("s1", "1", "2150-01-01 10:00", "90") +
                                                vitals_row("s1", "1", "2150-01-01 09:00", "80") +
                                                vitals_row("s1", "1", "2150-01-01 11:00", "70")}});
  const auto out = assemble_visits(tables);
  REQUIRE(out.visits.size() == 1);
  const auto& v = out.visits[0].vitals;
  REQUIRE(v.size() == 3);
  CHECK(*v[0].heartrate == 80);
  CHECK(*v[1].heartrate == 90);
  CHECK(*v[2].heartrate == 70);
  CHECK(out.rejected.empty());
  CHECK(out.visits[0].hadm_id == "h1");
}

TEST_CASE("orphan modality rows are rejected, not fatal") {
  const auto tables = parse_all({{"arrival", arrival_row("s1", "1")},
                                 {"vitals", vitals_row("s1", "1", "2150-01-01 10:00", "90") +
                                                vitals_row("s9", "999", "2150-01-01 10:00", "90")}});
  const auto out = assemble_visits(tables);
  CHECK(out.visits.size() == 1);
  REQUIRE(out.rejected.size() == 1);
  CHECK(out.rejected[0].table == "vitals");
  CHECK(out.rejected[0].row == 1);
  CHECK(out.rejected[0].stay_id == "999");
}

TEST_CASE("interleaved rows partition exactly by stay, with row conservation") {
  std::mt19937_64 rng(5);
  std::map<std::string, std::string> bodies;
  bodies["arrival"] = arrival_row("sA", "1") + arrival_row("sB", "2");
  std::map<std::string, int> expected_vitals, expected_pyxis;
  int orphans = 0;
  int total = 0;
  for (int i = 0; i < 60; ++i) {
    const int pick = static_cast<int>(rng() % 3);
    const std::string stay = pick == 0 ? "1" : pick == 1 ? "2" : "77";
    const std::string subject = pick == 0 ? "sA" : pick == 1 ? "sB" : "sZ";
    const std::string time = "2150-01-01 0" + std::to_string(rng() % 10) + ":00";
    if (rng() % 2) {
      bodies["vitals"] += vitals_row(subject, stay, time, std::to_string(60 + i));
      ++expected_vitals[stay];
    } else {
      bodies["pyxis"] += subject + "," + stay + "," + time + ",1,Drug" + std::to_string(i) + ",\n";
      ++expected_pyxis[stay];
    }
    ++total;
    orphans += pick == 2;
  }
  const auto tables = parse_all(bodies);
  const auto out = assemble_visits(tables);
  REQUIRE(out.visits.size() == 2);
  for (const auto& v : out.visits) {
    CHECK(static_cast<int>(v.vitals.size()) == expected_vitals[v.stay_id]);
    CHECK(static_cast<int>(v.pyxis.size()) == expected_pyxis[v.stay_id]);
    CHECK(std::is_sorted(v.vitals.begin(), v.vitals.end(),
                         [](const auto& a, const auto& b) { return a.charttime < b.charttime; }));
    CHECK(std::is_sorted(v.pyxis.begin(), v.pyxis.end(),
                         [](const auto& a, const auto& b) { return a.charttime < b.charttime; }));
  }
  CHECK(static_cast<int>(out.rejected.size()) == orphans);
  CHECK(static_cast<int>(out.accepted_rows + out.rejected.size()) == total);

  const auto again = assemble_visits(tables);
  REQUIRE(again.visits.size() == out.visits.size());
  for (std::size_t i = 0; i < out.visits.size(); ++i) {
    const auto& a = out.visits[i];
    const auto& b = again.visits[i];
    CHECK(a.stay_id == b.stay_id);
    REQUIRE(a.pyxis.size() == b.pyxis.size());
    for (std::size_t k = 0; k < a.pyxis.size(); ++k) CHECK(a.pyxis[k].name == b.pyxis[k].name);
    REQUIRE(a.vitals.size() == b.vitals.size());
    for (std::size_t k = 0; k < a.vitals.size(); ++k) CHECK(a.vitals[k].heartrate == b.vitals[k].heartrate);
  }
}

TEST_CASE("equal timestamps keep source row order") {
  const auto tables =
      parse_all({{"arrival", arrival_row("s1", "1")},
                 {"pyxis", "s1,1,2150-01-01 10:00,1,Beta,\ns1,1,2150-01-01 09:00,1,Alpha,\n"
                           "s1,1,2150-01-01 10:00,1,Gamma,\n"}});
  const auto out = assemble_visits(tables);
  REQUIRE(out.visits[0].pyxis.size() == 3);
  CHECK(out.visits[0].pyxis[0].name == "Alpha");
  CHECK(out.visits[0].pyxis[1].name == "Beta");
  CHECK(out.visits[0].pyxis[2].name == "Gamma");
}

TEST_CASE("duplicate triage and arrival rows are reported") {
  const auto tables = parse_all(
      {{"arrival", arrival_row("s1", "1") + arrival_row("s1", "1")},
       {"triage", "s1,1,98.6,,,,,,,,cough\ns1,1,99.0,,,,,,,,fever\n"}});
  const auto out = assemble_visits(tables);
  REQUIRE(out.visits.size() == 1);
  CHECK(out.visits[0].triage->chiefcomplaint == "cough");
  CHECK(out.rejected.size() == 2);
}

TEST_CASE("microbiology extraction applies polarity and drops duplicates") {
  const std::string header = kHeaders.at("micro_susceptibility");
  const std::string body =
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,Vancomycin,S\n"
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,Oxacillin,R\n"
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,Rifampin,I\n"
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,Vancomycin,R\n"
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,Penicillin,S\n"
      "s1,h1,1,2150-01-01,blood,STAPH AUREUS COAG +,,\n";
  const auto table = parse_table(header + body, schema_for("micro_susceptibility"));

  const auto plain = extract_microbiology(table);
  CHECK(plain.cultures.size() == 1);
  REQUIRE(plain.labels.size() == 3);
  CHECK(plain.labels[0].antibiotic == Antibiotic::kVancomycin);
  CHECK(plain.labels[0].susceptible == 1);
  CHECK(plain.labels[1].susceptible == 0);
  CHECK(plain.labels[2].susceptible == 0);
  CHECK(plain.duplicate_labels == 1);
  CHECK(plain.unknown_antibiotics == 1);

  LabelOptions flip;
  flip.positive = LabelPolarity::kResistant;
  flip.intermediate_as_susceptible = true;
  const auto flipped = extract_microbiology(table, flip);
  CHECK(flipped.labels[0].susceptible == 0);
  CHECK(flipped.labels[1].susceptible == 1);
  CHECK(flipped.labels[2].susceptible == 0);
}

TEST_CASE("source directories load from files") {
  TempDir dir;
  for (const auto& [name, header] : kHeaders) steward::testing::spit(dir.path() / (name + ".csv"), header);
  steward::testing::spit(dir.path() / "arrival.csv", kHeaders.at("arrival") + arrival_row("s1", "1"));
  const auto src = load_source_dir(dir.str());
  CHECK(src.tables.size() == 7);
  CHECK(src.tables.at("arrival").rows.size() == 1);
  std::filesystem::remove(dir.path() / "pyxis.csv");
  CHECK_THROWS_AS(load_source_dir(dir.str()), IoError);
}
