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

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steward/cohort.hpp"
#include "steward/embed.hpp"

namespace steward {

// Dummy-coded tabular view of a cohort: one row per visit in canonical
// (stay_id) order. Free-text fields (chief complaint, medication and
// dispensation names, diagnosis titles) are not featurized.
struct FeatureFrame {
  std::vector<std::string> stay_ids;
  std::vector<std::string> names;    // unique column names
  std::vector<std::string> sources;  // source field of each column
  Eigen::MatrixXd values;            // masked cells hold 0
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;

  // Source field -> emitted column indices, in column order.
  std::map<std::string, std::vector<std::size_t>> dictionary() const;
  // Values with NaN at masked cells, the form the GBDT consumes.
  Eigen::MatrixXd with_nan() const;
  // Float copy for the shared binary-matrix format; masked cells are NaN.
  EmbeddingMatrix to_matrix() const;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct TabularOptions {
  std::size_t cardinality_cap = 64;  // named one-hot columns per categorical
};

// Numeric fields pass through with a companion "<name>:missing" indicator
// column; vitals contribute last/min/max/mean per kind. Categoricals
// (gender, race, arrival_transport, disposition, last rhythm) get one
// column per top-cap category, ranked by frequency then name, plus an
// OTHER column; a null value is its own "(null)" category. Diagnoses are
// multi-hot over "<version>:<first three code characters>".
FeatureFrame featurize_tabular(const Cohort& cohort, const TabularOptions& options = {});

}  // namespace steward
