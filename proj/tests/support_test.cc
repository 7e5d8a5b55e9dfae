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

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/Core>
#include <gtest/gtest.h>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/seeding.h"

namespace collapse {
namespace {

TEST(SeedingTest, KnownVectors) {
  // SplitMix64 first output from state 0; FNV-1a 64 offset basis and "a".
  EXPECT_EQ(MixSeed(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(HashName(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(HashName("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(SeedingTest, DerivedStreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (const char* label : {"build-field", "learn-masks", "rank", "evaluate"}) {
    seen.insert(DeriveSeed(7, label));
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(DeriveSeed(7, label, i));
  }
  EXPECT_EQ(seen.size(), 404u);
  EXPECT_EQ(DeriveSeed(7, "rank", 3), DeriveSeed(7, "rank", 3));
  EXPECT_NE(DeriveSeed(7, "rank"), DeriveSeed(8, "rank"));
}

TEST(CsvTest, RealsRoundTripExactly) {
  for (double v : {0.1, -1e-300, 1.0 / 3.0, 12345.678, 0.0,
                   std::numeric_limits<double>::max()}) {
    EXPECT_EQ(ParseReal(FormatReal(v)), v);
  }
  EXPECT_EQ(FormatReal(0.5), "0.5");
}

TEST(CsvTest, ParseRealIsStrict) {
  EXPECT_THROW(ParseReal("1.5x"), InvalidInputError);
  EXPECT_THROW(ParseReal(""), InvalidInputError);
  EXPECT_THROW(ParseReal("abc"), InvalidInputError);
}

TEST(CsvTest, TableRoundTrip) {
  CsvTable table;
  table.header = {"a", "b"};
  table.rows = {{"1", "x"}, {"2", "y"}};
  const auto parsed = ParseCsv(table.ToString());
  EXPECT_EQ(parsed.header, table.header);
  EXPECT_EQ(parsed.rows, table.rows);
  EXPECT_EQ(parsed.Column("b"), 1u);
  EXPECT_THROW(parsed.Column("c"), InvalidInputError);
  EXPECT_THROW(ParseCsv("a,b\n1\n"), InvalidInputError);
}

TEST(CsvTest, MatrixRoundTrip) {
  Eigen::MatrixXd m(2, 3);
  m << 0.1, 0.2, 0.3, -4.0, 1e-17, 6.0;
  EXPECT_EQ(MatrixFromCsv(MatrixToCsv(m)), m);
  EXPECT_THROW(MatrixFromCsv("1,2\n3\n"), InvalidInputError);
}

TEST(CsvTest, MissingFileIsInvalidInput) {
  EXPECT_THROW(ReadTextFile("/nonexistent/dir/file.csv"), InvalidInputError);
}

}  // namespace
}  // namespace collapse
