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

#include "steward/common.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace steward {

namespace {
constexpr std::array<std::string_view, kNumAntibiotics> kNames = {
    "Clindamycin", "Daptomycin", "Erythromycin", "Gentamicin",
    "Levofloxacin", "Oxacillin", "Rifampin", "Tetracycline",
    "Trimethoprim/sulfa", "Vancomycin",
};
}  // namespace

std::string_view antibiotic_name(Antibiotic a) { return kNames[index_of(a)]; }

std::optional<Antibiotic> parse_antibiotic(std::string_view name) {
  const std::string lower = to_lower(name);
  for (std::size_t i = 0; i < kNumAntibiotics; ++i) {
    if (lower == to_lower(kNames[i])) return kAllAntibiotics[i];
  }
  if (lower == "trimethoprim/sul") return Antibiotic::kTrimethoprimSulfa;
  return std::nullopt;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool icontains(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STEWARD_THREADS")) {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec == std::errc() && v > 0) return v;
  }
  return hw;
}

}  // namespace steward
