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

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace steward::csv {

using Row = std::vector<std::string>;

// RFC 4180: comma separated, '"' quoting with "" escapes, quoted fields may
// span lines, CRLF or LF record terminators. A trailing newline does not
// produce an empty record. Throws IoError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::string& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace steward::csv
