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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "steward/cohort.hpp"
#include "steward/timestamp.hpp"

namespace steward {

enum class ColumnKind : std::uint8_t { kString, kInteger, kFloat, kTimestamp, kCode };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kString;
  bool nullable = false;
};

struct TableSchema {
  std::string table_name;
  std::vector<ColumnSpec> columns;

  // Throws SchemaError on duplicate column names or when no key column
  // (subject_id, stay_id, hadm_id) is declared.
  void validate() const;
  std::optional<std::size_t> find(std::string_view column) const;
};

// Null is monostate; kString and kCode cells hold std::string.
using Cell = std::variant<std::monostate, std::string, std::int64_t, double, Timestamp>;

struct RawTable {
  TableSchema schema;
  std::vector<std::vector<Cell>> rows;  // cells in schema column order
  std::size_t ignored_columns = 0;      // header columns not in the schema

  std::size_t column(std::string_view name) const;

  bool is_null(std::size_t row, std::size_t col) const;
  std::optional<std::string> text(std::size_t row, std::size_t col) const;
  std::optional<std::int64_t> integer(std::size_t row, std::size_t col) const;
  std::optional<double> number(std::size_t row, std::size_t col) const;
  std::optional<Timestamp> time(std::size_t row, std::size_t col) const;
};

// The seven source tables. Names double as file stems (<name>.csv).
inline constexpr std::array<std::string_view, 6> kModalityTables = {
    "arrival", "triage", "medrecon", "vitals", "diagnosis", "pyxis"};
inline constexpr std::string_view kMicroTable = "micro_susceptibility";

const std::map<std::string, TableSchema>& standard_schemas();
const TableSchema& schema_for(std::string_view table_name);

// Parses delimited text against the schema. Non-nullable schema columns must
// be present in the header; absent nullable columns read as null. Row numbers
// in error messages are 1-based data rows (the header is not counted).
RawTable parse_table(std::string_view text, const TableSchema& schema);
RawTable load_table(const std::string& path, const TableSchema& schema);

struct RejectedRow {
  std::string table;
  std::size_t row = 0;  // 0-based data row
  std::string stay_id;
  std::string reason;
};

struct AssembledVisits {
  std::vector<EDVisit> visits;  // sorted by stay_id
  std::vector<RejectedRow> rejected;
  std::size_t accepted_rows = 0;  // modality rows attached (excluding arrival)
};

// One visit per distinct arrival stay_id. Modality rows whose stay_id is
// unknown are reported in `rejected`; so are duplicate arrival and triage
// rows. Within a visit, timestamped lists are sorted by time and then by
// source row order; diagnoses by seq_num then source order.
AssembledVisits assemble_visits(const std::map<std::string, RawTable>& tables);

enum class LabelPolarity : std::uint8_t { kSusceptible, kResistant };

struct LabelOptions {
  LabelPolarity positive = LabelPolarity::kSusceptible;
  // How "I" interpretations count: true => same as S.
  bool intermediate_as_susceptible = false;
};

struct Microbiology {
  std::vector<CultureResult> cultures;
  std::vector<PrescriptionLabelRow> labels;
  std::size_t duplicate_labels = 0;  // repeated (stay_id, antibiotic) pairs dropped
  std::size_t unknown_antibiotics = 0;
};

// Splits the micro_susceptibility table into distinct cultures and
// (stay, antibiotic) label rows. Rows without an interpretation or with an
// antibiotic outside the fixed set contribute a culture but no label.
Microbiology extract_microbiology(const RawTable& micro, const LabelOptions& options = {});

struct SourceTables {
  std::map<std::string, RawTable> tables;  // all seven, keyed by name
};

// Loads all seven <name>.csv files from a directory.
SourceTables load_source_dir(const std::string& dir);

}  // namespace steward
