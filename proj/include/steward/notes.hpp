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
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steward/cohort.hpp"

namespace steward {

enum class Modality : std::uint8_t { kArrival, kTriage, kMedrecon, kVitals, kDiagnoses, kPyxis };

// Fixed serialization order; clinically earliest information first.
inline constexpr std::array<Modality, 6> kModalityOrder = {
    Modality::kArrival, Modality::kTriage,    Modality::kMedrecon,
    Modality::kVitals,  Modality::kDiagnoses, Modality::kPyxis};

std::string_view modality_name(Modality m);
// Placeholder names a template for `m` may reference.
std::span<const std::string_view> modality_fields(Modality m);

// Sentence template for one modality.
//
// A segment renders as `lead`, a space, the rendered rows joined by
// `row_sep`, and a closing period. Each row renders the fragments whose
// placeholders are all non-null, joined by `fragment_sep`; fragments that
// reference a null field vanish, so no "None"-style filler ever appears.
// A modality with no rows (or only all-null rows) renders `empty`.
//
// On disk a template is `key = value` lines; `fragment` may repeat and
// keeps file order, values may be double-quoted to keep edge spaces, and
// '#' starts a comment line.
struct ModalityTemplate {
  std::string lead;
  std::vector<std::string> fragments;
  std::string fragment_sep = " ";
  std::string row_sep = ", ";
  std::string empty;

  // Throws ConfigError on unknown keys or placeholders not in
  // modality_fields(m).
  static ModalityTemplate parse(std::string_view text, Modality m);
  std::string to_text() const;
};

class TemplateSet {
 public:
  static const TemplateSet& builtin();
  // Reads <dir>/<modality_name>.tmpl for each modality.
  static TemplateSet load_dir(const std::string& dir);
  void save_dir(const std::string& dir) const;

  const ModalityTemplate& at(Modality m) const { return templates_[static_cast<std::size_t>(m)]; }
  ModalityTemplate& at(Modality m) { return templates_[static_cast<std::size_t>(m)]; }

 private:
  std::array<ModalityTemplate, 6> templates_;
};

// Tokens of a template set's fixed wording (placeholders removed). These
// occur in every note and carry no per-visit information.
std::set<std::string> template_tokens(const TemplateSet& templates = TemplateSet::builtin());

struct NoteSegment {
  Modality modality = Modality::kArrival;
  std::size_t start = 0;  // byte offsets, end exclusive
  std::size_t end = 0;
};

// Segments appear in kModalityOrder and are separated by exactly one space:
// segments[i+1].start == segments[i].end + 1, the first starts at 0 and
// the last ends at text.size(). Truncation may drop trailing segments.
struct PseudoNote {
  StayId stay_id;
  std::string text;
  std::vector<NoteSegment> segments;
  std::size_t token_count = 0;
  bool truncated = false;
};

std::string serialize_modality(const EDVisit& visit, Modality m,
                               const TemplateSet& templates = TemplateSet::builtin());

PseudoNote serialize_visit(const EDVisit& visit,
                           const TemplateSet& templates = TemplateSet::builtin());

// Keeps the first `budget_tokens` tokens, cutting the text right after the
// last kept token; later modalities are lost first. `truncated` stays set
// once set, which makes the operation idempotent. Requires budget >= 1.
PseudoNote truncate_to_budget(const PseudoNote& note, std::size_t budget_tokens);

// JSON-lines export, one {"stay_id", "text", "truncated"} object per line.
void write_notes_jsonl(std::ostream& out, std::span<const PseudoNote> notes);
std::vector<PseudoNote> read_notes_jsonl(std::istream& in);

}  // namespace steward
