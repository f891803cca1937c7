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
#include <string>
#include <string_view>
#include <vector>

namespace steward {

struct TokenSpan {
  std::size_t begin = 0;  // byte offsets into the source text, end exclusive
  std::size_t end = 0;
};

// Tokens are maximal runs of ASCII letters, ASCII digits and non-ASCII
// bytes (so UTF-8 words stay whole); everything else separates. Numbers are
// ordinary tokens: "98.6" yields "98" and "6".
std::vector<TokenSpan> token_spans(std::string_view text);

// Lowercased tokens in order.
std::vector<std::string> tokenize(std::string_view text);

std::size_t count_tokens(std::string_view text);

}  // namespace steward
