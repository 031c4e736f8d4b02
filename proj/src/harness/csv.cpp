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

#include "loco/harness/csv.hpp"

#include <cstdio>

#include "loco/common.hpp"

namespace loco::harness {

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header)
    : out_(out), header_(std::move(header)) {}

std::string CsvWriter::quote(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string CsvWriter::field(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void CsvWriter::meta(const std::string& key, const std::string& value) {
  if (header_written_) throw UsageError("csv metadata must precede the header");
  if (key.find_first_of("=\r\n") != std::string::npos ||
      value.find_first_of("\r\n") != std::string::npos) {
    throw UsageError("csv metadata '" + key + "' must be a single line");
  }
  out_ << "# " << key << "=" << value << "\r\n";
}

void CsvWriter::flush_header() {
  if (header_written_) return;
  header_written_ = true;
  for (std::size_t i = 0; i < header_.size(); ++i) out_ << (i ? "," : "") << quote(header_[i]);
  out_ << "\r\n";
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != header_.size()) {
    throw UsageError("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                     std::to_string(header_.size()));
  }
  flush_header();
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << quote(fields[i]);
  out_ << "\r\n";
  ++rows_;
}

std::vector<std::string> parse_csv_record(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r' && c != '\n') {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace loco::harness
