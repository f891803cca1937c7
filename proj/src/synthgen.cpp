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

#include "steward/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "steward/csv.hpp"
#include "steward/notes.hpp"
#include "steward/timestamp.hpp"
#include "steward/tokenize.hpp"

namespace steward {

namespace {

// Published train/test label counts per antibiotic over 5976 prescriptions;
// default coverage is their share.
constexpr std::array<std::pair<int, int>, kNumAntibiotics> kPublishedCounts = {{
    {2645, 624}, {1815, 425}, {2626, 639}, {4549, 1127}, {2866, 715},
    {2702, 667}, {1929, 459}, {3747, 909}, {3671, 908}, {2529, 611},
}};
constexpr double kPublishedPrescriptions = 5976.0;

const std::vector<std::string> kCommonMedications = {
    "aspirin", "atorvastatin", "lisinopril", "multivitamin", "amlodipine", "levothyroxine"};
const std::vector<DiagnosisTerm> kCommonDiagnoses = {
    {"I10", "Essential (primary) hypertension"},
    {"E785", "Hyperlipidemia, unspecified"},
    {"L0390", "Cellulitis, unspecified"},
    {"B9561", "Methicillin susceptible Staphylococcus aureus infection as the cause of "
              "diseases classified elsewhere"},
    {"N390", "Urinary tract infection, site not specified"},
    {"Z7901", "Long term (current) use of anticoagulants"},
};
const std::vector<std::string> kCommonDispensed = {
    "Acetaminophen", "Sodium Chloride 0.9%", "Vancomycin", "Ondansetron"};
const std::vector<std::string> kGenders = {"F", "M"};
const std::vector<std::string> kRaces = {"WHITE", "BLACK/AFRICAN AMERICAN", "HISPANIC/LATINO",
                                         "ASIAN", "OTHER"};
const std::vector<std::string> kTransport = {"AMBULANCE", "WALK IN", "UNKNOWN", "HELICOPTER"};
const std::vector<std::string> kDisposition = {"ADMITTED", "HOME", "TRANSFER"};
const std::vector<std::string> kRhythm = {"Sinus Rhythm", "Sinus Tachycardia", "Atrial Fibrillation"};
const std::vector<std::string> kStaphOrganisms = {"STAPH AUREUS COAG +",
                                                  "STAPHYLOCOCCUS, COAGULASE NEGATIVE"};
const std::vector<std::string> kOtherOrganisms = {"ESCHERICHIA COLI", "KLEBSIELLA PNEUMONIAE",
                                                  "PSEUDOMONAS AERUGINOSA"};
const std::vector<std::string> kQualifyingSources = {"blood", "urine", "cerebral_spinal_fluid",
                                                     "pleural_cavity", "joint_fluid"};

PhenotypeSpec phenotype(std::string name, std::vector<std::string> complaints,
                        std::vector<std::string> meds, std::vector<DiagnosisTerm> dx,
                        std::vector<std::string> dispensed) {
  PhenotypeSpec p;
  p.name = std::move(name);
  p.complaints = std::move(complaints);
  p.medications = std::move(meds);
  p.diagnoses = std::move(dx);
  p.dispensed = std::move(dispensed);
  return p;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool bernoulli(double p) { return uniform() < p; }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double rounded(double lo, double hi, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round((lo + (hi - lo) * uniform()) * scale) / scale;
  }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(integer(0, static_cast<int>(items.size()) - 1))];
  }
  std::size_t categorical(std::span<const double> weights) {
    double u = uniform();
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 rng_;
};

std::string opt(bool present, const std::string& value) { return present ? value : std::string(); }

class TableWriter {
 public:
  explicit TableWriter(std::vector<std::string> header) { csv::write_row(out_, header); }
  void row(const csv::Row& r) { csv::write_row(out_, r); }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

}  // namespace

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.phenotypes = {
      phenotype("sepsis", {"fever and chills", "sepsis", "hypotension"},
                {"norepinephrine", "cefepime", "piperacillin tazobactam"},
                {{"A419", "Sepsis, unspecified organism"},
                 {"R6520", "Severe sepsis without septic shock"},
                 {"R509", "Fever, unspecified"}},
                {"Cefepime", "Norepinephrine", "Lactated Ringers"}),
      phenotype("diabetes", {"hyperglycemia", "diabetic foot ulcer", "high blood sugar"},
                {"metformin", "insulin glargine", "glipizide"},
                {{"E119", "Type 2 diabetes mellitus without complications"},
                 {"E11621", "Type 2 diabetes mellitus with foot ulcer"},
                 {"E1165", "Type 2 diabetes mellitus with hyperglycemia"}},
                {"Insulin Regular", "Dextrose 50%"}),
      phenotype("stomach acid issues", {"epigastric pain", "heartburn", "acid reflux"},
                {"omeprazole", "pantoprazole", "famotidine"},
                {{"K219", "Gastro-esophageal reflux disease without esophagitis"},
                 {"K259", "Gastric ulcer, unspecified as acute or chronic"},
                 {"K2970", "Gastritis, unspecified, without bleeding"}},
                {"Pantoprazole", "Famotidine", "Maalox"}),
      phenotype("anxiety", {"anxiety", "panic attack", "palpitations"},
                {"lorazepam", "alprazolam", "buspirone"},
                {{"F419", "Anxiety disorder, unspecified"},
                 {"F410", "Panic disorder without agoraphobia"},
                 {"R002", "Palpitations"}},
                {"Lorazepam", "Hydroxyzine"}),
      phenotype("painkillers", {"back pain", "chronic pain", "opioid withdrawal"},
                {"oxycodone", "hydrocodone", "tramadol"},
                {{"M545", "Low back pain"},
                 {"G8929", "Other chronic pain"},
                 {"F1120", "Opioid dependence, uncomplicated"}},
                {"Oxycodone", "Morphine", "Ketorolac"}),
      phenotype("respiratory conditions", {"shortness of breath", "cough", "wheezing"},
                {"albuterol inhaler", "fluticasone salmeterol", "tiotropium"},
                {{"J441", "Chronic obstructive pulmonary disease with (acute) exacerbation"},
                 {"J189", "Pneumonia, unspecified organism"},
                 {"J45909", "Unspecified asthma, uncomplicated"}},
                {"Albuterol Nebulizer", "Ipratropium", "Methylprednisolone"}),
      phenotype("antidepressants", {"depression", "suicidal ideation", "low mood"},
                {"sertraline", "fluoxetine", "trazodone"},
                {{"F329", "Major depressive disorder, single episode, unspecified"},
                 {"F331", "Major depressive disorder, recurrent, moderate"},
                 {"R45851", "Suicidal ideations"}},
                {"Sertraline", "Trazodone"}),
  };
  const double prior = 1.0 / static_cast<double>(c.phenotypes.size());
  for (std::size_t k = 0; k < c.phenotypes.size(); ++k) {
    c.phenotypes[k].prior = prior;
    for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
      c.phenotypes[k].log_odds_offset[a] = ((k * 3 + a) % 7) < 3 ? 1.5 : -1.5;
    }
  }
  for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
    c.base_rates[a] = 0.5;
    c.coverage[a] = (kPublishedCounts[a].first + kPublishedCounts[a].second) /
                    kPublishedPrescriptions;
  }
  return c;
}

void SynthConfig::validate() const {
  if (n_patients < 1) throw ConfigError("n_patients must be >= 1");
  if (phenotypes.empty()) throw ConfigError("at least one phenotype is required");
  double total = 0.0;
  auto prob = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0, 1]");
  };
  for (const auto& p : phenotypes) {
    prob(p.prior, "prior of " + p.name);
    total += p.prior;
    if (p.complaints.empty() || p.medications.empty() || p.diagnoses.empty() ||
        p.dispensed.empty()) {
      throw ConfigError("phenotype " + p.name + " has an empty vocabulary list");
    }
    for (double o : p.log_odds_offset) {
      if (!std::isfinite(o)) throw ConfigError("phenotype " + p.name + " has a non-finite offset");
    }
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("phenotype priors must sum to 1");
  for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
    const std::string name(antibiotic_name(kAllAntibiotics[a]));
    prob(base_rates[a], "base rate of " + name);
    prob(coverage[a], "coverage of " + name);
  }
  prob(multi_visit_rate, "multi_visit_rate");
  prob(nonqualifying_rate, "nonqualifying_rate");
}

double susceptibility_probability(double base_rate, double offset) {
  if (base_rate <= 0.0) return 0.0;
  if (base_rate >= 1.0) return 1.0;
  const double z = std::log(base_rate / (1.0 - base_rate)) + offset;
  return 1.0 / (1.0 + std::exp(-z));
}

double mixture_bayes_auroc(std::span<const double> weight, std::span<const double> p) {
  double pos = 0.0, neg = 0.0, concordant = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    pos += weight[i] * p[i];
    neg += weight[i] * (1.0 - p[i]);
  }
  if (pos <= 0.0 || neg <= 0.0) return 0.5;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    for (std::size_t j = 0; j < weight.size(); ++j) {
      const double pair = weight[i] * p[i] * weight[j] * (1.0 - p[j]);
      if (p[i] > p[j]) {
        concordant += pair;
      } else if (p[i] == p[j]) {
        concordant += 0.5 * pair;
      }
    }
  }
  return concordant / (pos * neg);
}

std::map<std::string, std::vector<std::string>> signature_terms(const SynthConfig& config) {
  auto vocab_tokens = [](const PhenotypeSpec& p, bool with_dx) {
    std::set<std::string> out;
    auto add = [&](const std::string& s) {
      for (auto& t : tokenize(s)) out.insert(std::move(t));
    };
    for (const auto& s : p.complaints) add(s);
    for (const auto& s : p.medications) add(s);
    for (const auto& s : p.dispensed) add(s);
    if (with_dx) {
      for (const auto& d : p.diagnoses) add(d.icd_title);
    }
    return out;
  };
  std::set<std::string> shared;
  for (const auto& list : {kCommonMedications, kCommonDispensed}) {
    for (const auto& s : list) {
      for (auto& t : tokenize(s)) shared.insert(std::move(t));
    }
  }
  for (const auto& d : kCommonDiagnoses) {
    for (auto& t : tokenize(d.icd_title)) shared.insert(std::move(t));
  }
  // Template wording appears in every note and identifies nothing.
  for (auto m : kModalityOrder) {
    const auto& tmpl = TemplateSet::builtin().at(m);
    std::string text = tmpl.lead + " " + tmpl.empty;
    for (const auto& f : tmpl.fragments) text += " " + f;
    for (auto& t : tokenize(text)) shared.insert(std::move(t));
  }
  std::map<std::string, int> owners;
  std::vector<std::set<std::string>> per;
  for (const auto& p : config.phenotypes) {
    per.push_back(vocab_tokens(p, config.signal_in_codes));
    for (const auto& t : per.back()) ++owners[t];
  }
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t k = 0; k < config.phenotypes.size(); ++k) {
    auto& terms = out[config.phenotypes[k].name];
    for (const auto& t : per[k]) {
      if (owners[t] == 1 && !shared.count(t)) terms.push_back(t);
    }
  }
  return out;
}

SynthData generate_tables(const SynthConfig& config) {
  config.validate();
  Sampler rng(config.seed);

  TableWriter arrival({"subject_id", "stay_id", "hadm_id", "intime", "outtime", "age", "gender",
                       "race", "arrival_transport", "disposition"});
  TableWriter triage({"subject_id", "stay_id", "temperature", "heartrate", "resprate", "o2sat",
                      "sbp", "dbp", "pain", "acuity", "chiefcomplaint"});
  TableWriter medrecon({"subject_id", "stay_id", "charttime", "name", "gsn", "etcdescription"});
  TableWriter vitals({"subject_id", "stay_id", "charttime", "temperature", "heartrate",
                      "resprate", "o2sat", "sbp", "dbp", "rhythm", "pain"});
  TableWriter diagnosis({"subject_id", "stay_id", "seq_num", "icd_code", "icd_version",
                         "icd_title"});
  TableWriter pyxis({"subject_id", "stay_id", "charttime", "med_rn", "name", "gsn"});
  TableWriter micro({"subject_id", "hadm_id", "stay_id", "collected_at", "specimen_source",
                     "organism_name", "antibiotic", "interpretation"});

  std::vector<double> priors;
  for (const auto& p : config.phenotypes) priors.push_back(p.prior);

  nlohmann::ordered_json patients = nlohmann::ordered_json::array();
  std::vector<std::size_t> phenotype_counts(config.phenotypes.size(), 0);
  std::size_t stay_counter = 0;
  const Timestamp epoch = Timestamp::from_civil(2150, 1, 1);

  for (std::size_t i = 0; i < config.n_patients; ++i) {
    const std::string subject = std::to_string(10000000 + i);
    const std::size_t k = rng.categorical(priors);
    ++phenotype_counts[k];
    const PhenotypeSpec& ph = config.phenotypes[k];
    nlohmann::ordered_json stays = nlohmann::ordered_json::array();

    int n_visits = 1;
    if (rng.bernoulli(config.multi_visit_rate)) n_visits += rng.integer(1, 3);
    const int age0 = rng.integer(18, 88);
    const std::string& gender = rng.pick(kGenders);
    const std::string& race = rng.pick(kRaces);
    std::int64_t t = epoch.seconds() + static_cast<std::int64_t>(rng.integer(0, 3000)) * 86400 +
                     rng.integer(0, 86399);

    for (int v = 0; v < n_visits; ++v) {
      const std::string stay = std::to_string(30000000 + stay_counter);
      const std::string hadm = std::to_string(20000000 + stay_counter);
      ++stay_counter;
      stays.push_back(stay);
      t += static_cast<std::int64_t>(rng.integer(30, 400)) * 86400;
      const Timestamp intime(t);
      const Timestamp outtime(t + rng.integer(2, 12) * 3600);
      auto at = [&](int minutes) { return Timestamp(t + minutes * 60).str(); };

      arrival.row({subject, stay, hadm, intime.str(), opt(rng.bernoulli(0.95), outtime.str()),
                   opt(rng.bernoulli(0.97), std::to_string(age0 + v)), gender, race,
                   rng.pick(kTransport), rng.pick(kDisposition)});

      std::string complaint = rng.pick(ph.complaints);
      if (rng.bernoulli(0.3)) {
        const std::string& second = rng.pick(ph.complaints);
        if (second != complaint) complaint += ", " + second;
      }
      triage.row({subject, stay, opt(rng.bernoulli(0.95), format_number(rng.rounded(96.5, 102.5, 1))),
                  opt(rng.bernoulli(0.95), format_number(rng.integer(55, 135))),
                  opt(rng.bernoulli(0.95), format_number(rng.integer(12, 30))),
                  opt(rng.bernoulli(0.95), format_number(rng.integer(86, 100))),
                  opt(rng.bernoulli(0.95), format_number(rng.integer(85, 180))),
                  opt(rng.bernoulli(0.95), format_number(rng.integer(45, 105))),
                  opt(rng.bernoulli(0.9), format_number(rng.integer(0, 10))),
                  opt(rng.bernoulli(0.97), std::to_string(rng.integer(1, 5))), complaint});

      const int n_meds = rng.integer(2, 5);
      for (int m = 0; m < n_meds; ++m) {
        const bool own = rng.bernoulli(0.7);
        const std::string& name = own ? rng.pick(ph.medications) : rng.pick(kCommonMedications);
        medrecon.row({subject, stay, at(5 + m), name,
                      opt(rng.bernoulli(0.8), std::to_string(rng.integer(1000, 99999))),
                      opt(rng.bernoulli(0.5), own ? "Condition specific agent" : "Maintenance agent")});
      }

      const int n_vitals = rng.integer(1, 3);
      for (int s = 0; s < n_vitals; ++s) {
        vitals.row({subject, stay, at(30 + 60 * s),
                    opt(rng.bernoulli(0.9), format_number(rng.rounded(96.5, 102.5, 1))),
                    opt(rng.bernoulli(0.95), format_number(rng.integer(55, 135))),
                    opt(rng.bernoulli(0.95), format_number(rng.integer(12, 30))),
                    opt(rng.bernoulli(0.95), format_number(rng.integer(86, 100))),
                    opt(rng.bernoulli(0.95), format_number(rng.integer(85, 180))),
                    opt(rng.bernoulli(0.95), format_number(rng.integer(45, 105))),
                    opt(rng.bernoulli(0.5), rng.pick(kRhythm)),
                    opt(rng.bernoulli(0.6), format_number(rng.integer(0, 10)))});
      }

      int seq = 1;
      if (config.signal_in_codes) {
        const auto& d = rng.pick(ph.diagnoses);
        diagnosis.row({subject, stay, std::to_string(seq++), d.icd_code, "10", d.icd_title});
      }
      const int n_common = rng.integer(config.signal_in_codes ? 0 : 1, 2);
      for (int d = 0; d < n_common; ++d) {
        const auto& term = rng.pick(kCommonDiagnoses);
        diagnosis.row({subject, stay, std::to_string(seq++), term.icd_code, "10", term.icd_title});
      }

      const int n_pyxis = rng.integer(1, 3);
      for (int p = 0; p < n_pyxis; ++p) {
        const bool own = rng.bernoulli(0.7);
        pyxis.row({subject, stay, at(45 + 20 * p), std::to_string(p + 1),
                   own ? rng.pick(ph.dispensed) : rng.pick(kCommonDispensed),
                   opt(rng.bernoulli(0.8), std::to_string(rng.integer(1000, 99999)))});
      }

      const bool qualifies = !rng.bernoulli(config.nonqualifying_rate);
      std::string organism = rng.pick(kStaphOrganisms);
      std::string source = rng.pick(kQualifyingSources);
      if (!qualifies) {
        if (rng.bernoulli(0.5)) {
          organism = rng.pick(kOtherOrganisms);
        } else {
          source = "sputum";
        }
      }
      const std::string collected = at(20);
      bool any_tested = false;
      for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
        if (!rng.bernoulli(config.coverage[a])) continue;
        any_tested = true;
        const double p = susceptibility_probability(config.base_rates[a], ph.log_odds_offset[a]);
        micro.row({subject, hadm, stay, collected, source, organism,
                   std::string(antibiotic_name(kAllAntibiotics[a])), rng.bernoulli(p) ? "S" : "R"});
      }
      if (!any_tested) micro.row({subject, hadm, stay, collected, source, organism, "", ""});
    }
    patients.push_back({{"subject_id", subject}, {"phenotype", ph.name}, {"stays", stays}});
  }

  SynthData out;
  out.tables = {{"arrival", arrival.str()},   {"triage", triage.str()},
                {"medrecon", medrecon.str()}, {"vitals", vitals.str()},
                {"diagnosis", diagnosis.str()}, {"pyxis", pyxis.str()},
                {"micro_susceptibility", micro.str()}};

  auto& m = out.manifest;
  m["generator"] = "steward-synthgen";
  m["seed"] = config.seed;
  m["n_patients"] = config.n_patients;
  m["n_stays"] = stay_counter;
  m["config"] = to_json(config);
  nlohmann::ordered_json bayes;
  for (std::size_t a = 0; a < kNumAntibiotics; ++a) {
    std::vector<double> p;
    for (const auto& ph : config.phenotypes) {
      p.push_back(susceptibility_probability(config.base_rates[a], ph.log_odds_offset[a]));
    }
    bayes[std::string(antibiotic_name(kAllAntibiotics[a]))] = mixture_bayes_auroc(priors, p);
  }
  m["bayes_auroc"] = bayes;
  nlohmann::ordered_json freq;
  for (std::size_t k = 0; k < config.phenotypes.size(); ++k) {
    freq[config.phenotypes[k].name] =
        static_cast<double>(phenotype_counts[k]) / static_cast<double>(config.n_patients);
  }
  m["phenotype_frequency"] = freq;
  m["signature_terms"] = signature_terms(config);
  m["patients"] = patients;
  return out;
}

std::map<std::string, std::string> phenotype_of_stay(const nlohmann::json& manifest) {
  std::map<std::string, std::string> out;
  if (!manifest.contains("patients")) throw SchemaError("manifest has no patients");
  for (const auto& p : manifest.at("patients")) {
    const auto name = p.at("phenotype").get<std::string>();
    for (const auto& s : p.at("stays")) out[s.get<std::string>()] = name;
  }
  return out;
}

EmbeddingMatrix planted_embeddings(const nlohmann::json& manifest,
                                   const std::vector<std::string>& stay_ids, int dim,
                                   double noise, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("planted dimension must be positive");
  if (!(noise >= 0.0)) throw ConfigError("planted noise must be non-negative");
  const auto of_stay = phenotype_of_stay(manifest);
  std::map<std::string, Eigen::VectorXf> centroids;
  std::vector<std::string> names;
  for (const auto& [stay, name] : of_stay) names.push_back(name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (const auto& name : names) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(name)));
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXf c(dim);
    for (int j = 0; j < dim; ++j) c[j] = static_cast<float>(normal(rng));
    centroids.emplace(name, std::move(c));
  }
  EmbeddingMatrix m;
  m.backend_id = "planted";
  m.values.resize(static_cast<Eigen::Index>(stay_ids.size()), dim);
  for (std::size_t i = 0; i < stay_ids.size(); ++i) {
    const auto it = of_stay.find(stay_ids[i]);
    if (it == of_stay.end()) throw Error("stay " + stay_ids[i] + " not in manifest");
    std::mt19937_64 rng(mix_seed(seed ^ 0x9e3779b97f4a7c15ULL, fnv1a64(stay_ids[i])));
    std::normal_distribution<double> normal(0.0, noise * scale);
    auto row = m.values.row(static_cast<Eigen::Index>(i));
    row = centroids.at(it->second).transpose();
    for (int j = 0; j < dim; ++j) row[j] += static_cast<float>(normal(rng));
    m.stay_ids.push_back(stay_ids[i]);
  }
  return m;
}

void generate(const SynthConfig& config, const std::string& out_dir) {
  const auto data = generate_tables(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  auto write = [&](const std::string& file, const std::string& body) {
    const auto path = (std::filesystem::path(out_dir) / file).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << body;
    if (!out) throw IoError("write failed for " + path);
  };
  for (const auto& [name, body] : data.tables) write(name + ".csv", body);
  write("manifest.json", data.manifest.dump(2) + "\n");
}

nlohmann::ordered_json to_json(const SynthConfig& config) {
  nlohmann::ordered_json j;
  j["n_patients"] = config.n_patients;
  j["seed"] = config.seed;
  j["multi_visit_rate"] = config.multi_visit_rate;
  j["nonqualifying_rate"] = config.nonqualifying_rate;
  j["signal_in_codes"] = config.signal_in_codes;
  j["base_rates"] = config.base_rates;
  j["coverage"] = config.coverage;
  auto& phs = j["phenotypes"] = nlohmann::ordered_json::array();
  for (const auto& p : config.phenotypes) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    pj["prior"] = p.prior;
    pj["complaints"] = p.complaints;
    pj["medications"] = p.medications;
    auto& dx = pj["diagnoses"] = nlohmann::ordered_json::array();
    for (const auto& d : p.diagnoses) dx.push_back({d.icd_code, d.icd_title});
    pj["dispensed"] = p.dispensed;
    pj["log_odds_offset"] = p.log_odds_offset;
    phs.push_back(pj);
  }
  return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c = SynthConfig::defaults();
  c.n_patients = j.value("n_patients", c.n_patients);
  c.seed = j.value("seed", c.seed);
  c.multi_visit_rate = j.value("multi_visit_rate", c.multi_visit_rate);
  c.nonqualifying_rate = j.value("nonqualifying_rate", c.nonqualifying_rate);
  c.signal_in_codes = j.value("signal_in_codes", c.signal_in_codes);
  if (j.contains("base_rates")) c.base_rates = j.at("base_rates").get<decltype(c.base_rates)>();
  if (j.contains("coverage")) c.coverage = j.at("coverage").get<decltype(c.coverage)>();
  if (j.contains("phenotypes")) {
    c.phenotypes.clear();
    for (const auto& pj : j.at("phenotypes")) {
      PhenotypeSpec p;
      p.name = pj.at("name").get<std::string>();
      p.prior = pj.at("prior").get<double>();
      p.complaints = pj.at("complaints").get<std::vector<std::string>>();
      p.medications = pj.at("medications").get<std::vector<std::string>>();
      for (const auto& d : pj.at("diagnoses")) {
        p.diagnoses.push_back({d.at(0).get<std::string>(), d.at(1).get<std::string>()});
      }
      p.dispensed = pj.at("dispensed").get<std::vector<std::string>>();
      p.log_odds_offset = pj.at("log_odds_offset").get<decltype(p.log_odds_offset)>();
      c.phenotypes.push_back(std::move(p));
    }
  }
  return c;
}

}  // namespace steward
