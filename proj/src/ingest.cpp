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

#include "steward/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>
#include <numeric>
#include <set>

#include "steward/csv.hpp"

namespace steward {

namespace {

using K = ColumnKind;

TableSchema make(std::string name, std::vector<ColumnSpec> cols) {
  TableSchema s{std::move(name), std::move(cols)};
  s.validate();
  return s;
}

std::map<std::string, TableSchema> build_schemas() {
  std::map<std::string, TableSchema> m;
  auto add = [&](TableSchema s) { m.emplace(s.table_name, std::move(s)); };
  add(make("arrival", {{"subject_id", K::kString},
                       {"stay_id", K::kString},
                       {"hadm_id", K::kString, true},
                       {"intime", K::kTimestamp},
                       {"outtime", K::kTimestamp, true},
                       {"age", K::kInteger, true},
                       {"gender", K::kString, true},
                       {"race", K::kString, true},
                       {"arrival_transport", K::kString, true},
                       {"disposition", K::kString, true}}));
  add(make("triage", {{"subject_id", K::kString},
                      {"stay_id", K::kString},
                      {"temperature", K::kFloat, true},
                      {"heartrate", K::kFloat, true},
                      {"resprate", K::kFloat, true},
                      {"o2sat", K::kFloat, true},
                      {"sbp", K::kFloat, true},
                      {"dbp", K::kFloat, true},
                      {"pain", K::kFloat, true},
                      {"acuity", K::kInteger, true},
                      {"chiefcomplaint", K::kString, true}}));
  add(make("medrecon", {{"subject_id", K::kString},
                        {"stay_id", K::kString},
                        {"charttime", K::kTimestamp},
                        {"name", K::kString},
                        {"gsn", K::kCode, true},
                        {"etcdescription", K::kString, true}}));
  add(make("vitals", {{"subject_id", K::kString},
                      {"stay_id", K::kString},
                      {"charttime", K::kTimestamp},
                      {"temperature", K::kFloat, true},
                      {"heartrate", K::kFloat, true},
                      {"resprate", K::kFloat, true},
                      {"o2sat", K::kFloat, true},
                      {"sbp", K::kFloat, true},
                      {"dbp", K::kFloat, true},
                      {"rhythm", K::kString, true},
                      {"pain", K::kFloat, true}}));
  add(make("diagnosis", {{"subject_id", K::kString},
                         {"stay_id", K::kString},
                         {"seq_num", K::kInteger},
                         {"icd_code", K::kCode},
                         {"icd_version", K::kInteger},
                         {"icd_title", K::kString}}));
  add(make("pyxis", {{"subject_id", K::kString},
                     {"stay_id", K::kString},
                     {"charttime", K::kTimestamp},
                     {"med_rn", K::kInteger, true},
                     {"name", K::kString},
                     {"gsn", K::kCode, true}}));
  add(make("micro_susceptibility", {{"subject_id", K::kString},
                                    {"hadm_id", K::kString},
                                    {"stay_id", K::kString},
                                    {"collected_at", K::kTimestamp},
                                    {"specimen_source", K::kString},
                                    {"organism_name", K::kString},
                                    {"antibiotic", K::kString, true},
                                    {"interpretation", K::kCode, true}}));
  return m;
}

std::string kind_name(ColumnKind k) {
  switch (k) {
    case K::kString: return "string";
    case K::kInteger: return "integer";
    case K::kFloat: return "float";
    case K::kTimestamp: return "timestamp";
    case K::kCode: return "code";
  }
  return "?";
}

std::optional<Cell> parse_cell(const std::string& text, ColumnKind kind) {
  switch (kind) {
    case K::kString:
    case K::kCode:
      return Cell(text);
    case K::kInteger: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) return std::nullopt;
      return Cell(v);
    }
    case K::kFloat: {
      double v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
        return std::nullopt;
      }
      return Cell(v);
    }
    case K::kTimestamp: {
      auto t = Timestamp::parse(text);
      if (!t) return std::nullopt;
      return Cell(*t);
    }
  }
  return std::nullopt;
}

template <typename T>
std::optional<T> get_as(const RawTable& t, std::size_t row, std::size_t col) {
  const Cell& c = t.rows.at(row).at(col);
  if (const T* v = std::get_if<T>(&c)) return *v;
  return std::nullopt;
}

}  // namespace

void TableSchema::validate() const {
  std::set<std::string> seen;
  bool has_key = false;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) {
      throw SchemaError("table " + table_name + ": duplicate column '" + c.name + "'");
    }
    has_key |= c.name == "subject_id" || c.name == "stay_id" || c.name == "hadm_id";
  }
  if (!has_key) throw SchemaError("table " + table_name + ": no key column");
}

std::optional<std::size_t> TableSchema::find(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

std::size_t RawTable::column(std::string_view name) const {
  auto idx = schema.find(name);
  if (!idx) throw SchemaError("table " + schema.table_name + " has no column " + std::string(name));
  return *idx;
}

bool RawTable::is_null(std::size_t row, std::size_t col) const {
  return std::holds_alternative<std::monostate>(rows.at(row).at(col));
}
std::optional<std::string> RawTable::text(std::size_t row, std::size_t col) const {
  return get_as<std::string>(*this, row, col);
}
std::optional<std::int64_t> RawTable::integer(std::size_t row, std::size_t col) const {
  return get_as<std::int64_t>(*this, row, col);
}
std::optional<double> RawTable::number(std::size_t row, std::size_t col) const {
  return get_as<double>(*this, row, col);
}
std::optional<Timestamp> RawTable::time(std::size_t row, std::size_t col) const {
  return get_as<Timestamp>(*this, row, col);
}

const std::map<std::string, TableSchema>& standard_schemas() {
  static const auto schemas = build_schemas();
  return schemas;
}

const TableSchema& schema_for(std::string_view table_name) {
  const auto& all = standard_schemas();
  auto it = all.find(std::string(table_name));
  if (it == all.end()) throw SchemaError("unknown table " + std::string(table_name));
  return it->second;
}

RawTable parse_table(std::string_view text, const TableSchema& schema) {
  schema.validate();
  auto records = csv::parse(text);
  if (records.empty()) throw SchemaError("table " + schema.table_name + ": missing header row");

  const auto& header = records.front();
  std::map<std::string, std::size_t> header_pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!header_pos.emplace(header[i], i).second) {
      throw SchemaError("table " + schema.table_name + ": duplicate header '" + header[i] + "'");
    }
  }

  RawTable table;
  table.schema = schema;
  std::vector<std::optional<std::size_t>> source(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = header_pos.find(schema.columns[c].name);
    if (it != header_pos.end()) {
      source[c] = it->second;
    } else if (!schema.columns[c].nullable) {
      throw SchemaError("table " + schema.table_name + ": missing required column '" +
                        schema.columns[c].name + "'");
    }
  }
  for (const auto& [name, pos] : header_pos) {
    if (!schema.find(name)) ++table.ignored_columns;
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != header.size()) {
      throw SchemaError("table " + schema.table_name + ": row " + std::to_string(r) +
                        " has " + std::to_string(rec.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    std::vector<Cell> row(schema.columns.size());
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const auto& spec = schema.columns[c];
      if (!source[c]) continue;
      const std::string& raw = rec[*source[c]];
      if (raw.empty()) {
        if (!spec.nullable) {
          throw SchemaError("table " + schema.table_name + ": row " + std::to_string(r) +
                            ", column '" + spec.name + "': empty value in non-nullable column");
        }
        continue;
      }
      auto cell = parse_cell(raw, spec.kind);
      if (!cell) {
        throw SchemaError("table " + schema.table_name + ": row " + std::to_string(r) +
                          ", column '" + spec.name + "': cannot parse '" + raw + "' as " +
                          kind_name(spec.kind));
      }
      row[c] = std::move(*cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable load_table(const std::string& path, const TableSchema& schema) {
  auto records_text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }();
  try {
    return parse_table(records_text, schema);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

AssembledVisits assemble_visits(const std::map<std::string, RawTable>& tables) {
  for (auto name : kModalityTables) {
    if (!tables.count(std::string(name))) {
      throw SchemaError("assemble_visits: missing table " + std::string(name));
    }
  }
  AssembledVisits out;
  std::map<StayId, EDVisit> visits;

  const RawTable& arrival = tables.at("arrival");
  {
    const auto subj = arrival.column("subject_id"), stay = arrival.column("stay_id"),
               hadm = arrival.column("hadm_id"), intime = arrival.column("intime"),
               outtime = arrival.column("outtime"), age = arrival.column("age"),
               gender = arrival.column("gender"), race = arrival.column("race"),
               transport = arrival.column("arrival_transport"),
               disposition = arrival.column("disposition");
    for (std::size_t r = 0; r < arrival.rows.size(); ++r) {
      EDVisit v;
      v.subject_id = *arrival.text(r, subj);
      v.stay_id = *arrival.text(r, stay);
      v.hadm_id = arrival.text(r, hadm);
      v.arrival.intime = *arrival.time(r, intime);
      v.arrival.outtime = arrival.time(r, outtime);
      v.arrival.age = arrival.integer(r, age);
      v.arrival.gender = arrival.text(r, gender);
      v.arrival.race = arrival.text(r, race);
      v.arrival.arrival_transport = arrival.text(r, transport);
      v.arrival.disposition = arrival.text(r, disposition);
      if (v.subject_id.empty() || v.stay_id.empty()) {
        out.rejected.push_back({"arrival", r, v.stay_id, "empty identifier"});
        continue;
      }
      const StayId key = v.stay_id;
      if (!visits.emplace(key, std::move(v)).second) {
        out.rejected.push_back({"arrival", r, key, "duplicate stay_id"});
      }
    }
  }

  // Attaches each row of `table` to its visit via `attach`; rows with
  // unknown stay_id or a subject_id disagreeing with the visit are rejected.
  auto for_each_row = [&](const std::string& name, auto&& attach) {
    const RawTable& t = tables.at(name);
    const auto stay = t.column("stay_id");
    const auto subj = t.column("subject_id");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const StayId id = t.text(r, stay).value_or("");
      auto it = visits.find(id);
      if (it == visits.end()) {
        out.rejected.push_back({name, r, id, "stay_id not in arrival table"});
        continue;
      }
      if (t.text(r, subj).value_or("") != it->second.subject_id) {
        out.rejected.push_back({name, r, id, "subject_id does not match arrival row"});
        continue;
      }
      if (attach(it->second, t, r)) {
        ++out.accepted_rows;
      } else {
        out.rejected.push_back({name, r, id, "duplicate row for single-row modality"});
      }
    }
  };

  {
    const RawTable& t = tables.at("triage");
    const auto temp = t.column("temperature"), hr = t.column("heartrate"),
               rr = t.column("resprate"), o2 = t.column("o2sat"), sbp = t.column("sbp"),
               dbp = t.column("dbp"), pain = t.column("pain"), acuity = t.column("acuity"),
               cc = t.column("chiefcomplaint");
    for_each_row("triage", [&](EDVisit& v, const RawTable& tb, std::size_t r) {
      if (v.triage) return false;
      TriageInfo info;
      info.temperature = tb.number(r, temp);
      info.heartrate = tb.number(r, hr);
      info.resprate = tb.number(r, rr);
      info.o2sat = tb.number(r, o2);
      info.sbp = tb.number(r, sbp);
      info.dbp = tb.number(r, dbp);
      info.pain = tb.number(r, pain);
      info.acuity = tb.integer(r, acuity);
      info.chiefcomplaint = tb.text(r, cc);
      v.triage = std::move(info);
      return true;
    });
  }

  {
    const RawTable& t = tables.at("medrecon");
    const auto ct = t.column("charttime"), name = t.column("name"), gsn = t.column("gsn"),
               etc = t.column("etcdescription");
    for_each_row("medrecon", [&](EDVisit& v, const RawTable& tb, std::size_t r) {
      v.medrecon.push_back({*tb.time(r, ct), *tb.text(r, name), tb.text(r, gsn), tb.text(r, etc)});
      return true;
    });
  }
  {
    const RawTable& t = tables.at("vitals");
    const auto ct = t.column("charttime"), temp = t.column("temperature"),
               hr = t.column("heartrate"), rr = t.column("resprate"), o2 = t.column("o2sat"),
               sbp = t.column("sbp"), dbp = t.column("dbp"), rhythm = t.column("rhythm"),
               pain = t.column("pain");
    for_each_row("vitals", [&](EDVisit& v, const RawTable& tb, std::size_t r) {
      VitalSign s;
      s.charttime = *tb.time(r, ct);
      s.temperature = tb.number(r, temp);
      s.heartrate = tb.number(r, hr);
      s.resprate = tb.number(r, rr);
      s.o2sat = tb.number(r, o2);
      s.sbp = tb.number(r, sbp);
      s.dbp = tb.number(r, dbp);
      s.rhythm = tb.text(r, rhythm);
      s.pain = tb.number(r, pain);
      v.vitals.push_back(std::move(s));
      return true;
    });
  }
  {
    const RawTable& t = tables.at("diagnosis");
    const auto seq = t.column("seq_num"), code = t.column("icd_code"),
               ver = t.column("icd_version"), title = t.column("icd_title");
    for_each_row("diagnosis", [&](EDVisit& v, const RawTable& tb, std::size_t r) {
      v.diagnoses.push_back({*tb.integer(r, seq), *tb.text(r, code), *tb.integer(r, ver),
                             *tb.text(r, title)});
      return true;
    });
  }
  {
    const RawTable& t = tables.at("pyxis");
    const auto ct = t.column("charttime"), rn = t.column("med_rn"), name = t.column("name"),
               gsn = t.column("gsn");
    for_each_row("pyxis", [&](EDVisit& v, const RawTable& tb, std::size_t r) {
      v.pyxis.push_back({*tb.time(r, ct), *tb.text(r, name), tb.integer(r, rn), tb.text(r, gsn)});
      return true;
    });
  }

  // Rows were appended in source order, so stable sorts keep that order
  // among equal keys.
  auto by_time = [](const auto& a, const auto& b) { return a.charttime < b.charttime; };
  for (auto& [id, v] : visits) {
    std::stable_sort(v.medrecon.begin(), v.medrecon.end(), by_time);
    std::stable_sort(v.vitals.begin(), v.vitals.end(), by_time);
    std::stable_sort(v.pyxis.begin(), v.pyxis.end(), by_time);
    std::stable_sort(v.diagnoses.begin(), v.diagnoses.end(),
                     [](const auto& a, const auto& b) { return a.seq_num < b.seq_num; });
    out.visits.push_back(std::move(v));
  }
  return out;
}

Microbiology extract_microbiology(const RawTable& micro, const LabelOptions& options) {
  Microbiology out;
  const auto subj = micro.column("subject_id"), hadm = micro.column("hadm_id"),
             stay = micro.column("stay_id"), when = micro.column("collected_at"),
             source = micro.column("specimen_source"), org = micro.column("organism_name"),
             abx = micro.column("antibiotic"), interp = micro.column("interpretation");

  std::set<std::tuple<std::string, std::string, std::string, int, std::int64_t>> cultures_seen;
  std::set<std::pair<StayId, Antibiotic>> labels_seen;
  for (std::size_t r = 0; r < micro.rows.size(); ++r) {
    CultureResult c;
    c.subject_id = *micro.text(r, subj);
    c.hadm_id = *micro.text(r, hadm);
    c.organism_name = *micro.text(r, org);
    c.specimen_source = parse_specimen(*micro.text(r, source));
    c.collected_at = *micro.time(r, when);
    const auto key = std::make_tuple(c.subject_id, c.hadm_id, c.organism_name,
                                     static_cast<int>(c.specimen_source), c.collected_at.seconds());
    if (cultures_seen.insert(key).second) out.cultures.push_back(c);

    const auto abx_name = micro.text(r, abx);
    const auto code = micro.text(r, interp);
    if (!abx_name || !code) continue;
    const auto antibiotic = parse_antibiotic(*abx_name);
    if (!antibiotic) {
      ++out.unknown_antibiotics;
      continue;
    }
    const std::string flag = to_lower(*code);
    bool susceptible = false;
    if (flag == "s") {
      susceptible = true;
    } else if (flag == "i") {
      susceptible = options.intermediate_as_susceptible;
    } else if (flag != "r") {
      continue;
    }
    const StayId stay_id = *micro.text(r, stay);
    if (!labels_seen.emplace(stay_id, *antibiotic).second) {
      ++out.duplicate_labels;
      continue;
    }
    const bool positive =
        options.positive == LabelPolarity::kSusceptible ? susceptible : !susceptible;
    out.labels.push_back({c.subject_id, stay_id, c.hadm_id, *antibiotic, positive ? 1 : 0});
  }
  return out;
}

SourceTables load_source_dir(const std::string& dir) {
  SourceTables out;
  std::vector<std::string> names(kModalityTables.begin(), kModalityTables.end());
  names.emplace_back(kMicroTable);
  for (const auto& name : names) {
    const auto path = (std::filesystem::path(dir) / (name + ".csv")).string();
    out.tables.emplace(name, load_table(path, schema_for(name)));
  }
  return out;
}

}  // namespace steward
