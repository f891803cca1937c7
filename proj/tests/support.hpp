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

// Shared fixtures for the unit and acceptance suites.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "steward/cohort.hpp"

namespace steward::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "steward") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

inline Timestamp at(int day, int hour, int minute = 0) {
  return Timestamp::from_civil(2150, 1, static_cast<unsigned>(day), static_cast<unsigned>(hour),
                               static_cast<unsigned>(minute));
}

// A visit where every field is populated with a distinct sentinel.
inline EDVisit full_visit(const std::string& subject = "s1", const std::string& stay = "t1") {
  EDVisit v;
  v.subject_id = subject;
  v.stay_id = stay;
  v.hadm_id = "h-" + stay;
  v.arrival.intime = at(1, 8);
  v.arrival.outtime = at(1, 14);
  v.arrival.age = 67;
  v.arrival.gender = "F";
  v.arrival.race = "WHITE";
  v.arrival.arrival_transport = "AMBULANCE";
  v.arrival.disposition = "ADMITTED";
  TriageInfo t;
  t.temperature = 98.6;
  t.heartrate = 101;
  t.resprate = 18;
  t.o2sat = 95;
  t.sbp = 142;
  t.dbp = 83;
  t.pain = 7;
  t.acuity = 2;
  t.chiefcomplaint = "chest pain";
  v.triage = t;
  v.medrecon = {{at(1, 9), "metformin", "004245", "Antihyperglycemic, Biguanide Type"},
                {at(1, 9, 5), "lisinopril", std::nullopt, std::nullopt}};
  VitalSign a;
  a.charttime = at(1, 9, 30);
  a.temperature = 99.1;
  a.heartrate = 104;
  a.rhythm = "Sinus Tachycardia";
  VitalSign b;
  b.charttime = at(1, 11);
  b.heartrate = 88;
  b.sbp = 131;
  b.pain = 3;
  v.vitals = {a, b};
  v.diagnoses = {{1, "A419", 10, "Sepsis, unspecified organism"},
                 {2, "25000", 9, "Diabetes mellitus without mention of complication"}};
  v.pyxis = {{at(1, 10), "Vancomycin", 1, "043952"}, {at(1, 12), "Acetaminophen", 2, std::nullopt}};
  return v;
}

// Visit carrying only arrival data.
inline EDVisit bare_visit(const std::string& subject, const std::string& stay) {
  EDVisit v;
  v.subject_id = subject;
  v.stay_id = stay;
  v.arrival.intime = at(2, 3);
  return v;
}

// Cohort of `subjects` patients with `stays_per_subject` visits each and one
// label row per (stay, antibiotic in `antibiotics`). Every antibiotic
// sees both classes once there are three stays: label 0 when
// (stay index + antibiotic position) % 3 == 0.
inline Cohort grid_cohort(int subjects, int stays_per_subject,
                          const std::vector<Antibiotic>& antibiotics) {
  Cohort c;
  for (int s = 0; s < subjects; ++s) {
    for (int k = 0; k < stays_per_subject; ++k) {
      const std::string subject = "p" + std::to_string(1000 + s);
      const std::string stay = "v" + std::to_string(10000 + s * stays_per_subject + k);
      EDVisit v = bare_visit(subject, stay);
      v.hadm_id = "h" + stay;
      c.visits.emplace(stay, v);
      const int index = s * stays_per_subject + k;
      for (std::size_t a = 0; a < antibiotics.size(); ++a) {
        const int y = (index + static_cast<int>(a)) % 3 == 0 ? 0 : 1;
        c.labels.push_back({subject, stay, *v.hadm_id, antibiotics[a], y});
      }
    }
  }
  return c;
}

// Every non-null field value of a visit in its canonical textual form.
std::vector<std::string> field_values(const EDVisit& v) {
  std::vector<std::string> out = {v.subject_id, v.stay_id, v.arrival.intime.str()};
  auto add = [&](const auto& opt) {
    if (!opt) return;
    using T = std::decay_t<decltype(*opt)>;
    if constexpr (std::is_same_v<T, std::string>) {
      out.push_back(*opt);
    } else if constexpr (std::is_same_v<T, Timestamp>) {
      out.push_back(opt->str());
    } else {
      out.push_back(format_number(static_cast<double>(*opt)));
    }
  };
  add(v.hadm_id);
  add(v.arrival.outtime);
  add(v.arrival.age);
  add(v.arrival.gender);
  add(v.arrival.race);
  add(v.arrival.arrival_transport);
  add(v.arrival.disposition);
  if (v.triage) {
    const auto& t = *v.triage;
    add(t.temperature), add(t.heartrate), add(t.resprate), add(t.o2sat), add(t.sbp);
    add(t.dbp), add(t.pain), add(t.acuity), add(t.chiefcomplaint);
  }
  for (const auto& m : v.medrecon) {
    out.push_back(m.name);
    out.push_back(m.charttime.str());
    add(m.gsn), add(m.etcdescription);
  }
  for (const auto& s : v.vitals) {
    out.push_back(s.charttime.str());
    add(s.temperature), add(s.heartrate), add(s.resprate), add(s.o2sat), add(s.sbp);
    add(s.dbp), add(s.rhythm), add(s.pain);
  }
  for (const auto& d : v.diagnoses) {
    out.push_back(d.icd_code);
    out.push_back(d.icd_title);
    out.push_back(format_number(static_cast<double>(d.seq_num)));
    out.push_back(format_number(static_cast<double>(d.icd_version)));
  }
  for (const auto& p : v.pyxis) {
    out.push_back(p.name);
    out.push_back(p.charttime.str());
    add(p.med_rn), add(p.gsn);
  }
  return out;
}

}  // namespace steward::testing
