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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace steward {

// Seconds since 1970-01-01T00:00:00, no time zone. MIMIC-style extracts
// carry shifted local times, so zone handling is deliberately absent.
class Timestamp {
 public:
  Timestamp() = default;
  explicit Timestamp(std::int64_t seconds) : seconds_(seconds) {}

  // Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM" and "YYYY-MM-DD HH:MM:SS",
  // with either ' ' or 'T' as the date/time separator.
  static std::optional<Timestamp> parse(std::string_view text);
  static Timestamp from_civil(int year, unsigned month, unsigned day,
                              unsigned hour = 0, unsigned minute = 0,
                              unsigned second = 0);

  // Canonical "YYYY-MM-DD HH:MM:SS".
  std::string str() const;
  std::int64_t seconds() const { return seconds_; }

  auto operator<=>(const Timestamp&) const = default;

 private:
  std::int64_t seconds_ = 0;
};

}  // namespace steward
