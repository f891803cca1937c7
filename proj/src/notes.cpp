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

#include "steward/notes.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "steward/tokenize.hpp"

namespace steward {

namespace {

constexpr std::array<std::string_view, 6> kModalityNames = {
    "arrival", "triage", "medrecon", "vitals", "diagnosis", "pyxis"};

constexpr std::array<std::string_view, 10> kArrivalFields = {
    "subject_id", "stay_id", "hadm_id", "intime", "outtime",
    "age", "gender", "race", "arrival_transport", "disposition"};
constexpr std::array<std::string_view, 9> kTriageFields = {
    "temperature", "heartrate", "resprate", "o2sat", "sbp",
    "dbp", "pain", "acuity", "chiefcomplaint"};
constexpr std::array<std::string_view, 4> kMedreconFields = {
    "charttime", "name", "gsn", "etcdescription"};
constexpr std::array<std::string_view, 9> kVitalFields = {
    "charttime", "temperature", "heartrate", "resprate", "o2sat",
    "sbp", "dbp", "rhythm", "pain"};
constexpr std::array<std::string_view, 4> kDiagnosisFields = {
    "seq_num", "icd_code", "icd_version", "icd_title"};
constexpr std::array<std::string_view, 4> kPyxisFields = {
    "charttime", "name", "med_rn", "gsn"};

constexpr std::array<std::string_view, 6> kBuiltinTemplates = {
    R"(# Arrival: demographics, timing and mode of arrival.
lead = ""
fragment = Patient {subject_id} arrived at the emergency department on {intime}
fragment = for stay {stay_id}
fragment = (hospital admission {hadm_id})
fragment = by {arrival_transport}
fragment = at age {age}
fragment = with gender {gender}
fragment = and race {race}
fragment = and left on {outtime}
fragment = with disposition {disposition}
fragment_sep = " "
row_sep = ", "
empty = No arrival information recorded.
)",
    R"(# Triage: initial vitals, acuity and chief complaint.
lead = At triage the patient had
fragment = temperature {temperature}
fragment = heart rate {heartrate}
fragment = respiratory rate {resprate}
fragment = oxygen saturation {o2sat}
fragment = systolic blood pressure {sbp}
fragment = diastolic blood pressure {dbp}
fragment = pain score {pain}
fragment = acuity {acuity}
fragment = chief complaint {chiefcomplaint}
fragment_sep = ", "
row_sep = ", "
empty = No triage information recorded.
)",
    R"(# Medication reconciliation: one clause per medication.
lead = Medication reconciliation lists
fragment = {name}
fragment = ({etcdescription})
fragment = with code {gsn}
fragment = recorded {charttime}
fragment_sep = " "
row_sep = ", "
empty = No medication reconciliation information recorded.
)",
    R"(# Vital signs: one clause per measurement time.
lead = Vital signs were taken
fragment = at {charttime}
fragment = with temperature {temperature}
fragment = heart rate {heartrate}
fragment = respiratory rate {resprate}
fragment = oxygen saturation {o2sat}
fragment = systolic blood pressure {sbp}
fragment = diastolic blood pressure {dbp}
fragment = rhythm {rhythm}
fragment = pain score {pain}
fragment_sep = " "
row_sep = ", "
empty = No vital signs information recorded.
)",
    R"(# Diagnoses: ICD title followed by code details.
lead = Diagnoses include
fragment = {icd_title}
fragment = (ICD-{icd_version} code {icd_code}
fragment = sequence {seq_num})
fragment_sep = " "
row_sep = ", "
empty = No diagnosis information recorded.
)",
    R"(# Pyxis: medications dispensed during the stay.
lead = Medications dispensed from Pyxis were
fragment = {name}
fragment = at {charttime}
fragment = (order {med_rn}
fragment = code {gsn})
fragment_sep = " "
row_sep = ", "
empty = No pyxis information recorded.
)",
};

using FieldRow = std::vector<std::pair<std::string_view, std::optional<std::string>>>;

template <typename T>
std::optional<std::string> str(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    return format_number(*v);
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    return std::to_string(*v);
  } else if constexpr (std::is_same_v<T, Timestamp>) {
    return v->str();
  } else {
    return *v;
  }
}

std::vector<FieldRow> rows_of(const EDVisit& v, Modality m) {
  std::vector<FieldRow> rows;
  switch (m) {
    case Modality::kArrival: {
      const auto& a = v.arrival;
      rows.push_back({{"subject_id", v.subject_id},
                      {"stay_id", v.stay_id},
                      {"hadm_id", v.hadm_id},
                      {"intime", a.intime.str()},
                      {"outtime", str(a.outtime)},
                      {"age", str(a.age)},
                      {"gender", a.gender},
                      {"race", a.race},
                      {"arrival_transport", a.arrival_transport},
                      {"disposition", a.disposition}});
      break;
    }
    case Modality::kTriage:
      if (const auto& t = v.triage) {
        rows.push_back({{"temperature", str(t->temperature)},
                        {"heartrate", str(t->heartrate)},
                        {"resprate", str(t->resprate)},
                        {"o2sat", str(t->o2sat)},
                        {"sbp", str(t->sbp)},
                        {"dbp", str(t->dbp)},
                        {"pain", str(t->pain)},
                        {"acuity", str(t->acuity)},
                        {"chiefcomplaint", t->chiefcomplaint}});
      }
      break;
    case Modality::kMedrecon:
      for (const auto& e : v.medrecon) {
        rows.push_back({{"charttime", e.charttime.str()},
                        {"name", e.name},
                        {"gsn", e.gsn},
                        {"etcdescription", e.etcdescription}});
      }
      break;
    case Modality::kVitals:
      for (const auto& s : v.vitals) {
        rows.push_back({{"charttime", s.charttime.str()},
                        {"temperature", str(s.temperature)},
                        {"heartrate", str(s.heartrate)},
                        {"resprate", str(s.resprate)},
                        {"o2sat", str(s.o2sat)},
                        {"sbp", str(s.sbp)},
                        {"dbp", str(s.dbp)},
                        {"rhythm", s.rhythm},
                        {"pain", str(s.pain)}});
      }
      break;
    case Modality::kDiagnoses:
      for (const auto& d : v.diagnoses) {
        rows.push_back({{"seq_num", std::to_string(d.seq_num)},
                        {"icd_code", d.icd_code},
                        {"icd_version", std::to_string(d.icd_version)},
                        {"icd_title", d.icd_title}});
      }
      break;
    case Modality::kPyxis:
      for (const auto& p : v.pyxis) {
        rows.push_back({{"charttime", p.charttime.str()},
                        {"name", p.name},
                        {"med_rn", str(p.med_rn)},
                        {"gsn", p.gsn}});
      }
      break;
  }
  return rows;
}

// Splits a fragment into literal text and placeholder names. Placeholders
// are `{name}`; a brace without a matching close is literal.
struct Piece {
  bool placeholder = false;
  std::string text;
};

std::vector<Piece> split_fragment(std::string_view f) {
  std::vector<Piece> pieces;
  std::size_t i = 0;
  while (i < f.size()) {
    const auto open = f.find('{', i);
    const auto close = open == std::string_view::npos ? open : f.find('}', open);
    if (open == std::string_view::npos || close == std::string_view::npos) {
      pieces.push_back({false, std::string(f.substr(i))});
      break;
    }
    if (open > i) pieces.push_back({false, std::string(f.substr(i, open - i))});
    pieces.push_back({true, std::string(f.substr(open + 1, close - open - 1))});
    i = close + 1;
  }
  return pieces;
}

std::optional<std::string> render_fragment(std::string_view fragment, const FieldRow& row) {
  std::string out;
  for (const auto& piece : split_fragment(fragment)) {
    if (!piece.placeholder) {
      out += piece.text;
      continue;
    }
    auto it = std::find_if(row.begin(), row.end(),
                           [&](const auto& kv) { return kv.first == piece.text; });
    if (it == row.end() || !it->second) return std::nullopt;
    out += *it->second;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

std::string quote_if_needed(const std::string& v) {
  if (v.empty() || v.front() == ' ' || v.back() == ' ' || v.front() == '"') return '"' + v + '"';
  return v;
}

}  // namespace

std::string_view modality_name(Modality m) { return kModalityNames[static_cast<std::size_t>(m)]; }

std::span<const std::string_view> modality_fields(Modality m) {
  switch (m) {
    case Modality::kArrival: return kArrivalFields;
    case Modality::kTriage: return kTriageFields;
    case Modality::kMedrecon: return kMedreconFields;
    case Modality::kVitals: return kVitalFields;
    case Modality::kDiagnoses: return kDiagnosisFields;
    case Modality::kPyxis: return kPyxisFields;
  }
  return {};
}

ModalityTemplate ModalityTemplate::parse(std::string_view text, Modality m) {
  ModalityTemplate t;
  bool has_empty = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  const auto fields = modality_fields(m);
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(modality_name(m)) + " template line " +
                        std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(view.substr(0, eq));
    const auto value = unquote(trim(view.substr(eq + 1)));
    if (key == "lead") {
      t.lead = value;
    } else if (key == "fragment") {
      for (const auto& piece : split_fragment(value)) {
        if (piece.placeholder &&
            std::find(fields.begin(), fields.end(), piece.text) == fields.end()) {
          throw ConfigError(std::string(modality_name(m)) + " template line " +
                            std::to_string(lineno) + ": unknown field {" + piece.text + "}");
        }
      }
      t.fragments.push_back(value);
    } else if (key == "fragment_sep") {
      t.fragment_sep = value;
    } else if (key == "row_sep") {
      t.row_sep = value;
    } else if (key == "empty") {
      t.empty = value;
      has_empty = true;
    } else {
      throw ConfigError(std::string(modality_name(m)) + " template line " +
                        std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!has_empty || t.fragments.empty()) {
    throw ConfigError(std::string(modality_name(m)) + " template needs `empty` and a `fragment`");
  }
  return t;
}

std::string ModalityTemplate::to_text() const {
  std::string out = "lead = " + quote_if_needed(lead) + "\n";
  for (const auto& f : fragments) out += "fragment = " + f + "\n";
  out += "fragment_sep = " + quote_if_needed(fragment_sep) + "\n";
  out += "row_sep = " + quote_if_needed(row_sep) + "\n";
  out += "empty = " + empty + "\n";
  return out;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (auto m : kModalityOrder) {
      s.at(m) = ModalityTemplate::parse(kBuiltinTemplates[static_cast<std::size_t>(m)], m);
    }
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
  TemplateSet s;
  for (auto m : kModalityOrder) {
    const auto path = std::filesystem::path(dir) / (std::string(modality_name(m)) + ".tmpl");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    s.at(m) = ModalityTemplate::parse(buf.str(), m);
  }
  return s;
}

void TemplateSet::save_dir(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (auto m : kModalityOrder) {
    const auto path = std::filesystem::path(dir) / (std::string(modality_name(m)) + ".tmpl");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write template " + path.string());
    out << at(m).to_text();
  }
}

std::string serialize_modality(const EDVisit& visit, Modality m, const TemplateSet& templates) {
  const auto& tmpl = templates.at(m);
  std::vector<std::string> rendered_rows;
  for (const auto& row : rows_of(visit, m)) {
    std::string rendered;
    for (const auto& fragment : tmpl.fragments) {
      auto piece = render_fragment(fragment, row);
      if (!piece) continue;
      if (!rendered.empty()) rendered += tmpl.fragment_sep;
      rendered += *piece;
    }
    if (!rendered.empty()) rendered_rows.push_back(std::move(rendered));
  }
  if (rendered_rows.empty()) return tmpl.empty;

  std::string out = tmpl.lead;
  if (!out.empty()) out += ' ';
  for (std::size_t i = 0; i < rendered_rows.size(); ++i) {
    if (i) out += tmpl.row_sep;
    out += rendered_rows[i];
  }
  out += '.';
  return out;
}

PseudoNote serialize_visit(const EDVisit& visit, const TemplateSet& templates) {
  PseudoNote note;
  note.stay_id = visit.stay_id;
  for (auto m : kModalityOrder) {
    if (!note.text.empty()) note.text += ' ';
    const std::size_t start = note.text.size();
    note.text += serialize_modality(visit, m, templates);
    note.segments.push_back({m, start, note.text.size()});
  }
  note.token_count = count_tokens(note.text);
  return note;
}

PseudoNote truncate_to_budget(const PseudoNote& note, std::size_t budget_tokens) {
  if (budget_tokens == 0) throw ConfigError("token budget must be >= 1");
  const auto spans = token_spans(note.text);
  if (spans.size() <= budget_tokens) {
    PseudoNote out = note;
    out.token_count = spans.size();
    return out;
  }
  const std::size_t cut = spans[budget_tokens - 1].end;
  PseudoNote out;
  out.stay_id = note.stay_id;
  out.text = note.text.substr(0, cut);
  for (const auto& s : note.segments) {
    if (s.start >= cut) break;
    out.segments.push_back({s.modality, s.start, std::min(s.end, cut)});
  }
  out.token_count = budget_tokens;
  out.truncated = true;
  return out;
}

void write_notes_jsonl(std::ostream& out, std::span<const PseudoNote> notes) {
  for (const auto& n : notes) {
    nlohmann::ordered_json j;
    j["stay_id"] = n.stay_id;
    j["text"] = n.text;
    j["truncated"] = n.truncated;
    out << j.dump() << '\n';
  }
}

std::vector<PseudoNote> read_notes_jsonl(std::istream& in) {
  std::vector<PseudoNote> notes;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    PseudoNote n;
    n.stay_id = j.at("stay_id").get<std::string>();
    n.text = j.at("text").get<std::string>();
    n.truncated = j.at("truncated").get<bool>();
    n.token_count = count_tokens(n.text);
    notes.push_back(std::move(n));
  }
  return notes;
}

std::set<std::string> template_tokens(const TemplateSet& templates) {
  std::set<std::string> out;
  auto add = [&](const std::string& text) {
    std::string fixed;
    bool in_placeholder = false;
    for (char c : text) {
      if (c == '{') in_placeholder = true;
      if (!in_placeholder) fixed.push_back(c);
      if (c == '}') {
        in_placeholder = false;
        fixed.push_back(' ');
      }
    }
    for (auto& t : tokenize(fixed)) out.insert(std::move(t));
  };
  for (Modality m : kModalityOrder) {
    const auto& t = templates.at(m);
    add(t.lead);
    add(t.empty);
    for (const auto& f : t.fragments) add(f);
  }
  return out;
}

}  // namespace steward
