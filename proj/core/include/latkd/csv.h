// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKD_CSV_H_
#define LATKD_CSV_H_

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latkd {

// One parsed CSV field. Unquoted empty fields are nulls; a quoted empty field
// ("") is an empty, non-null string.
struct CsvField {
  std::string text;
  bool is_null = false;
};

// Streaming reader for comma-separated, double-quote escaped UTF-8 text.
// Quoted fields may span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record into `fields`; returns false at end of input.
  bool Next(std::vector<CsvField>& fields);
  // 1-based physical line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

// Quotes a field when it contains a separator, quote or newline.
std::string CsvEscape(std::string_view field);

}  // namespace latkd

#endif  // LATKD_CSV_H_
