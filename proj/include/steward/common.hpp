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

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace steward {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a metric is undefined on the given sample (e.g. single class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

// Carries the list of offending input rows alongside the message.
class ValidationError : public Error {
 public:
  ValidationError(std::string message, std::vector<std::string> offending)
      : Error(std::move(message)), offending_(std::move(offending)) {}
  const std::vector<std::string>& offending() const { return offending_; }

 private:
  std::vector<std::string> offending_;
};

enum class Antibiotic : std::uint8_t {
  kClindamycin,
  kDaptomycin,
  kErythromycin,
  kGentamicin,
  kLevofloxacin,
  kOxacillin,
  kRifampin,
  kTetracycline,
  kTrimethoprimSulfa,
  kVancomycin,
};

inline constexpr std::size_t kNumAntibiotics = 10;

inline constexpr std::array<Antibiotic, kNumAntibiotics> kAllAntibiotics = {
    Antibiotic::kClindamycin,  Antibiotic::kDaptomycin,
    Antibiotic::kErythromycin, Antibiotic::kGentamicin,
    Antibiotic::kLevofloxacin, Antibiotic::kOxacillin,
    Antibiotic::kRifampin,     Antibiotic::kTetracycline,
    Antibiotic::kTrimethoprimSulfa, Antibiotic::kVancomycin,
};

std::string_view antibiotic_name(Antibiotic a);
// Case-insensitive; accepts "Trimethoprim/sulfa" and the truncated
// "Trimethoprim/sul" spelling. Returns nullopt for anything else.
std::optional<Antibiotic> parse_antibiotic(std::string_view name);
inline std::size_t index_of(Antibiotic a) { return static_cast<std::size_t>(a); }

std::string to_lower(std::string_view s);
bool icontains(std::string_view haystack, std::string_view needle);

// Shortest round-trip decimal rendering; this is the canonical textual form
// of numeric field values everywhere (notes, CSV output, fidelity checks).
std::string format_number(double v);

// 64-bit FNV-1a, used for fingerprints and content hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// SplitMix64 finalizer. Used to derive independent per-task seeds from
// (seed, counter) so parallel and serial runs consume identical streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter);

// Thread cap from STEWARD_THREADS (default: hardware concurrency, min 1).
unsigned thread_cap();

}  // namespace steward
