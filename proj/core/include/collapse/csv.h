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

#ifndef COLLAPSE_CSV_H_
#define COLLAPSE_CSV_H_

#include <string>
#include <vector>

#include <Eigen/Core>

namespace collapse {

// Strict decimal parse; throws InvalidInputError on trailing garbage.
double ParseReal(const std::string& cell);

// Formats a double so that parsing the text recovers the same value.
std::string FormatReal(double value);

// Minimal comma-separated table with a header row. Values are stored as
// text so that rows may mix integers, labels and reals.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string ToString() const;

  // Column index by header name; throws InvalidInputError when absent.
  std::size_t Column(const std::string& name) const;
};

CsvTable ParseCsv(const std::string& text);

// Dense matrix with no header, one row per line.
std::string MatrixToCsv(const Eigen::MatrixXd& matrix);
Eigen::MatrixXd MatrixFromCsv(const std::string& text);

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& contents);

}  // namespace collapse

#endif  // COLLAPSE_CSV_H_
