// Copyright 2026 The Patch Collapse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "collapse/csv.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "collapse/errors.h"

namespace collapse {
namespace {

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

double ParseReal(const std::string& cell) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInputError("not a number: '" + cell + "'");
  }
  return value;
}

std::string FormatReal(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw InvalidInputError("cannot format real");
  return std::string(buffer, ptr);
}

std::string CsvTable::ToString() const {
  std::ostringstream out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

std::size_t CsvTable::Column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidInputError("missing CSV column '" + name + "'");
}

CsvTable ParseCsv(const std::string& text) {
  const auto lines = Lines(text);
  if (lines.empty()) throw InvalidInputError("empty CSV");
  CsvTable table;
  table.header = SplitLine(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = SplitLine(lines[i]);
    if (cells.size() != table.header.size()) {
      throw InvalidInputError("CSV row " + std::to_string(i) + " has " +
                              std::to_string(cells.size()) +
                              " cells, header has " +
                              std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::string MatrixToCsv(const Eigen::MatrixXd& matrix) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      if (c > 0) out << ',';
      out << FormatReal(matrix(r, c));
    }
    out << '\n';
  }
  return out.str();
}

Eigen::MatrixXd MatrixFromCsv(const std::string& text) {
  const auto lines = Lines(text);
  if (lines.empty()) throw InvalidInputError("empty matrix CSV");
  const auto cols = SplitLine(lines.front()).size();
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(lines.size()),
                         static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto cells = SplitLine(lines[r]);
    if (cells.size() != cols) {
      throw InvalidInputError("ragged matrix CSV at line " +
                              std::to_string(r + 1));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          ParseReal(cells[c]);
    }
  }
  return matrix;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteTextFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw InvalidInputError("write failed for '" + path + "'");
}

}  // namespace collapse
