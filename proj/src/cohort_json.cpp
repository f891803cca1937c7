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

#include <optional>

#include "steward/cohort.hpp"

namespace steward {

namespace {

using Json = nlohmann::ordered_json;

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json opt(const std::optional<Timestamp>& v) { return v ? Json(v->str()) : Json(nullptr); }

Timestamp time_of(const nlohmann::json& j) {
  const auto t = Timestamp::parse(j.get<std::string>());
  if (!t) throw Error("bad timestamp '" + j.get<std::string>() + "'");
  return *t;
}

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::optional<Timestamp> time_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return time_of(j.at(key));
}

Json visit_json(const EDVisit& v) {
  Json j;
  j["subject_id"] = v.subject_id;
  j["stay_id"] = v.stay_id;
  j["hadm_id"] = opt(v.hadm_id);
  const auto& a = v.arrival;
  j["arrival"] = {{"intime", a.intime.str()},          {"outtime", opt(a.outtime)},
                  {"age", opt(a.age)},                 {"gender", opt(a.gender)},
                  {"race", opt(a.race)},               {"arrival_transport", opt(a.arrival_transport)},
                  {"disposition", opt(a.disposition)}};
  if (v.triage) {
    const auto& t = *v.triage;
    j["triage"] = {{"temperature", opt(t.temperature)}, {"heartrate", opt(t.heartrate)},
                   {"resprate", opt(t.resprate)},       {"o2sat", opt(t.o2sat)},
                   {"sbp", opt(t.sbp)},                 {"dbp", opt(t.dbp)},
                   {"pain", opt(t.pain)},               {"acuity", opt(t.acuity)},
                   {"chiefcomplaint", opt(t.chiefcomplaint)}};
  } else {
    j["triage"] = nullptr;
  }
  Json med = Json::array();
  for (const auto& m : v.medrecon) {
    med.push_back({{"charttime", m.charttime.str()}, {"name", m.name}, {"gsn", opt(m.gsn)},
                   {"etcdescription", opt(m.etcdescription)}});
  }
  j["medrecon"] = std::move(med);
  Json vit = Json::array();
  for (const auto& s : v.vitals) {
    vit.push_back({{"charttime", s.charttime.str()}, {"temperature", opt(s.temperature)},
                   {"heartrate", opt(s.heartrate)},  {"resprate", opt(s.resprate)},
                   {"o2sat", opt(s.o2sat)},          {"sbp", opt(s.sbp)},
                   {"dbp", opt(s.dbp)},              {"rhythm", opt(s.rhythm)},
                   {"pain", opt(s.pain)}});
  }
  j["vitals"] = std::move(vit);
  Json dx = Json::array();
  for (const auto& d : v.diagnoses) {
    dx.push_back({{"seq_num", d.seq_num}, {"icd_code", d.icd_code},
                  {"icd_version", d.icd_version}, {"icd_title", d.icd_title}});
  }
  j["diagnoses"] = std::move(dx);
  Json px = Json::array();
  for (const auto& p : v.pyxis) {
    px.push_back({{"charttime", p.charttime.str()}, {"name", p.name}, {"med_rn", opt(p.med_rn)},
                  {"gsn", opt(p.gsn)}});
  }
  j["pyxis"] = std::move(px);
  return j;
}

EDVisit visit_from_json(const nlohmann::json& j) {
  EDVisit v;
  v.subject_id = j.at("subject_id").get<std::string>();
  v.stay_id = j.at("stay_id").get<std::string>();
  v.hadm_id = get_opt<std::string>(j, "hadm_id");
  const auto& a = j.at("arrival");
  v.arrival.intime = time_of(a.at("intime"));
  v.arrival.outtime = time_opt(a, "outtime");
  v.arrival.age = get_opt<std::int64_t>(a, "age");
  v.arrival.gender = get_opt<std::string>(a, "gender");
  v.arrival.race = get_opt<std::string>(a, "race");
  v.arrival.arrival_transport = get_opt<std::string>(a, "arrival_transport");
  v.arrival.disposition = get_opt<std::string>(a, "disposition");
  if (j.contains("triage") && !j.at("triage").is_null()) {
    const auto& t = j.at("triage");
    TriageInfo tri;
    tri.temperature = get_opt<double>(t, "temperature");
    tri.heartrate = get_opt<double>(t, "heartrate");
    tri.resprate = get_opt<double>(t, "resprate");
    tri.o2sat = get_opt<double>(t, "o2sat");
    tri.sbp = get_opt<double>(t, "sbp");
    tri.dbp = get_opt<double>(t, "dbp");
    tri.pain = get_opt<double>(t, "pain");
    tri.acuity = get_opt<std::int64_t>(t, "acuity");
    tri.chiefcomplaint = get_opt<std::string>(t, "chiefcomplaint");
    v.triage = tri;
  }
  for (const auto& m : j.at("medrecon")) {
    v.medrecon.push_back({time_of(m.at("charttime")), m.at("name").get<std::string>(),
                          get_opt<std::string>(m, "gsn"), get_opt<std::string>(m, "etcdescription")});
  }
  for (const auto& s : j.at("vitals")) {
    VitalSign vs;
    vs.charttime = time_of(s.at("charttime"));
    vs.temperature = get_opt<double>(s, "temperature");
    vs.heartrate = get_opt<double>(s, "heartrate");
    vs.resprate = get_opt<double>(s, "resprate");
    vs.o2sat = get_opt<double>(s, "o2sat");
    vs.sbp = get_opt<double>(s, "sbp");
    vs.dbp = get_opt<double>(s, "dbp");
    vs.rhythm = get_opt<std::string>(s, "rhythm");
    vs.pain = get_opt<double>(s, "pain");
    v.vitals.push_back(std::move(vs));
  }
  for (const auto& d : j.at("diagnoses")) {
    v.diagnoses.push_back({d.at("seq_num").get<std::int64_t>(), d.at("icd_code").get<std::string>(),
                           d.at("icd_version").get<std::int64_t>(),
                           d.at("icd_title").get<std::string>()});
  }
  for (const auto& p : j.at("pyxis")) {
    v.pyxis.push_back({time_of(p.at("charttime")), p.at("name").get<std::string>(),
                       get_opt<std::int64_t>(p, "med_rn"), get_opt<std::string>(p, "gsn")});
  }
  return v;
}

}  // namespace

nlohmann::ordered_json to_json(const Cohort& cohort) {
  Json j;
  j["format"] = "steward-cohort";
  j["version"] = 1;
  Json split = Json::object();
  for (const auto& [subject, part] : cohort.split) {
    split[subject] = part == Partition::kTrain ? "train" : "test";
  }
  j["split"] = std::move(split);
  Json labels = Json::array();
  for (const auto& l : cohort.labels) {
    labels.push_back({l.subject_id, l.stay_id, l.hadm_id, antibiotic_name(l.antibiotic),
                      l.susceptible});
  }
  j["labels"] = std::move(labels);
  Json visits = Json::array();
  for (const auto& [stay, v] : cohort.visits) visits.push_back(visit_json(v));
  j["visits"] = std::move(visits);
  return j;
}

Cohort cohort_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "steward-cohort") throw Error("not a cohort file");
    Cohort c;
    for (const auto& [subject, part] : j.at("split").items()) {
      const auto p = part.get<std::string>();
      if (p != "train" && p != "test") throw Error("bad partition '" + p + "'");
      c.split.emplace(subject, p == "train" ? Partition::kTrain : Partition::kTest);
    }
    for (const auto& l : j.at("labels")) {
      const auto name = l.at(3).get<std::string>();
      const auto a = parse_antibiotic(name);
      if (!a) throw Error("unknown antibiotic '" + name + "'");
      c.labels.push_back({l.at(0).get<std::string>(), l.at(1).get<std::string>(),
                          l.at(2).get<std::string>(), *a, l.at(4).get<int>()});
    }
    for (const auto& vj : j.at("visits")) {
      EDVisit v = visit_from_json(vj);
      const std::string stay = v.stay_id;
      c.visits.emplace(stay, std::move(v));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed cohort: ") + e.what());
  }
}

}  // namespace steward
