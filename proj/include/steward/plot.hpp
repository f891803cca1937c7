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

#include <string>
#include <vector>

#include "steward/eval.hpp"

namespace steward {

// Writes roc_<antibiotic>.svg and pr_<antibiotic>.svg into out_dir for
// every antibiotic with curve points: fixed 0-1 axes, one series per
// representation, a legend, and the point estimate with its CI per series
// in the subtitle. Returns the written paths in antibiotic order.
std::vector<std::string> emit_plots(const std::vector<CurveSet>& curves,
                                    const std::vector<MetricReport>& reports,
                                    const std::string& out_dir);

// File-name form of an antibiotic: lowercase, '/' replaced by '_'.
std::string antibiotic_slug(Antibiotic a);

std::string xml_escape(std::string_view text);

}  // namespace steward
