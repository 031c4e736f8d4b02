// Copyright 2026 The loco Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace loco::harness {

// RFC 4180 output: CRLF records, fields quoted when they hold a comma, quote
// or line break. Metadata goes out as "# key=value" lines before the header.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  void meta(const std::string& key, const std::string& value);
  void row(const std::vector<std::string>& fields);

  template <typename... Ts>
  void values(const Ts&... vs) {
    row({field(vs)...});
  }

  std::size_t rows() const { return rows_; }

  static std::string quote(const std::string& field);

 private:
  static std::string field(const std::string& s) { return s; }
  static std::string field(const char* s) { return s; }
  static std::string field(double v);
  template <typename T>
  static std::string field(const T& v) {
    return std::to_string(v);
  }
  void flush_header();

  std::ostream& out_;
  std::vector<std::string> header_;
  bool header_written_ = false;
  std::size_t rows_ = 0;
};

// Splits one RFC 4180 record; used to read back what CsvWriter produced.
std::vector<std::string> parse_csv_record(const std::string& line);

}  // namespace loco::harness
