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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/gaussian_field.h"
#include "commands.h"
#include "experiment_config.h"
#include "json.hpp"

namespace collapse::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const std::vector<std::string> kFast = {
    "train.epochs=4",        "train.steps_per_epoch=3", "train.batch_size=64",
    "model.n_patches=8",     "eval.n_random=5",         "eval.n_fields=20",
    "eval.rate_points=6",    "eval.signal_patches=2",
    "eval.classifier.train_per_class=100", "eval.classifier.test_per_class=100",
    "eval.classifier.iterations=50"};

std::string TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("collapse_cli_test_" + name);
  fs::remove_all(dir);
  return dir.string();
}

ExperimentConfig Fast(std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = kFast;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  return ResolveConfig("", overrides, nullptr);
}

std::string Slurp(const std::string& dir, const std::string& file) {
  return ReadTextFile((fs::path(dir) / file).string());
}

int RunCli(const std::string& args, const std::string& stderr_path) {
  const std::string command =
      std::string(COLLAPSE_CLI_PATH) + " " + args + " >/dev/null 2>" + stderr_path;
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(ResolveConfigTest, DefaultsAreValid) {
  const auto config = ResolveConfig("", {}, nullptr);
  EXPECT_EQ(config.model.n_patches, 16);
  EXPECT_EQ(config.model.spec.kind, StructureKind::kStar);
  EXPECT_EQ(config.train.lambda_c, 0.01);
  EXPECT_EQ(config.graph.damping, 0.85);
  EXPECT_EQ(config.eval.rate_points, 34);
  EXPECT_EQ(config.eval.classifier.max_rate, 0.99);
  EXPECT_EQ(Json::parse(DefaultConfigJson()), Json::parse(config.json));
}

TEST(ResolveConfigTest, UnknownKeysAreNamed) {
  try {
    ResolveConfig("", {"train.epoch=3"}, nullptr);
    FAIL() << "expected InvalidInputError";
  } catch (const InvalidInputError& e) {
    EXPECT_NE(std::string(e.what()).find("'train.epoch'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ResolveConfig("", {"bogus=1"}, nullptr), InvalidInputError);
}

TEST(ResolveConfigTest, TypeAndRangeChecksNameTheKey) {
  try {
    ResolveConfig("", {"graph.damping=1.5"}, nullptr);
    FAIL();
  } catch (const InvalidInputError& e) {
    EXPECT_NE(std::string(e.what()).find("graph.damping"), std::string::npos);
  }
  EXPECT_THROW(ResolveConfig("", {"train.epochs=2.5"}, nullptr), InvalidInputError);
  EXPECT_THROW(ResolveConfig("", {"train=3"}, nullptr), InvalidInputError);
  EXPECT_THROW(ResolveConfig("", {"model.kind=ring"}, nullptr), InvalidInputError);
  EXPECT_THROW(ResolveConfig("", {"noequals"}, nullptr), InvalidInputError);
  EXPECT_THROW(ResolveConfig("", {"train.sigma=0"}, nullptr), InvalidInputError);
}

TEST(ResolveConfigTest, FileThenOverridesThenSeed) {
  const std::string dir = TempDir("resolve");
  fs::create_directories(dir);
  const std::string path = (fs::path(dir) / "config.json").string();
  WriteTextFile(path, R"({"master_seed": 5, "model": {"kind": "chain", "coupling": 0.3},
                          "train": {"epochs": 7}})");
  auto config = ResolveConfig(path, {"train.epochs=9", "model.blocks=[[0,1]]"}, nullptr);
  EXPECT_EQ(config.model.spec.kind, StructureKind::kChain);
  EXPECT_EQ(config.model.spec.coupling, 0.3);
  EXPECT_EQ(config.train.epochs, 9);
  EXPECT_EQ(config.master_seed, 5u);
  EXPECT_EQ(config.model.spec.blocks, (std::vector<std::vector<int>>{{0, 1}}));
  const std::int64_t seed = 11;
  EXPECT_EQ(ResolveConfig(path, {}, &seed).master_seed, 11u);
  EXPECT_NE(ConfigHash(ResolveConfig(path, {}, &seed)), ConfigHash(config));

  WriteTextFile(path, "{not json");
  EXPECT_THROW(ResolveConfig(path, {}, nullptr), InvalidInputError);
  EXPECT_THROW(ResolveConfig((fs::path(dir) / "missing.json").string(), {}, nullptr),
               InvalidInputError);
}

TEST(StagesTest, BuildFieldIsDeterministicAndValid) {
  const std::string a = TempDir("build_a");
  const std::string b = TempDir("build_b");
  const auto config = Fast({"model.kind=independent"});
  BuildField(config, a);
  BuildField(config, b);
  for (const char* file : {"model.json", "fields.json", "config.json"}) {
    EXPECT_EQ(Slurp(a, file), Slurp(b, file)) << file;
  }
  const auto model = ModelFromJson(Slurp(a, "model.json"));
  EXPECT_EQ(model.n_patches(), 8);
  EXPECT_GT(model.min_precision_eigenvalue(), 0.0);
  const auto fields = FieldsFromJson(Slurp(a, "fields.json"));
  EXPECT_EQ(fields.size(), 16u);
  EXPECT_EQ(fields[0].model_id, model.id());
}

TEST(StagesTest, LearnMasksReportAndSensitivity) {
  const std::string dir = TempDir("learn");
  const std::string other = TempDir("learn_off");
  const auto config = Fast();
  BuildField(config, dir);
  LearnMasks(config, dir);
  const auto report = ParseCsv(Slurp(dir, "train_report.csv"));
  EXPECT_EQ(report.header, (std::vector<std::string>{"epoch", "recon_loss", "contrastive_loss",
                                                     "mask_entropy", "seconds"}));
  ASSERT_EQ(report.rows.size(), 4u);
  const auto col = report.Column("mask_entropy");
  EXPECT_LT(ParseReal(report.rows.back()[col]), ParseReal(report.rows.front()[col]));

  const auto off = Fast({"train.lambda_c=0"});
  BuildField(off, other);
  LearnMasks(off, other);
  EXPECT_EQ(Slurp(dir, "model.json"), Slurp(other, "model.json"));
  EXPECT_NE(Slurp(dir, "masks.csv"), Slurp(other, "masks.csv"));
}

TEST(StagesTest, RankAgreementAndMissingInput) {
  const std::string dir = TempDir("rank");
  const auto config = Fast();
  EXPECT_THROW(Rank(config, dir), InvalidInputError);
  BuildField(config, dir);
  LearnMasks(config, dir);
  Rank(config, dir);
  const Json agreement = Json::parse(Slurp(dir, "rank_agreement.json"));
  EXPECT_LT(agreement["max_disagreement"].get<double>(), 1e-8);
  EXPECT_TRUE(agreement["orders_identical"].get<bool>());
  const auto table = ParseCsv(Slurp(dir, "rankings.csv"));
  EXPECT_EQ(table.rows.size(), 24u);
}

TEST(StagesTest, EvaluateManifestAndDeterminism) {
  const std::string dir = TempDir("eval");
  const auto config = Fast();
  RunAll(config, dir);
  const Json manifest = Json::parse(Slurp(dir, "manifest.json"));
  EXPECT_EQ(manifest["version"], std::string(kVersion));
  EXPECT_EQ(manifest["config_hash"], ConfigHash(config));
  std::vector<std::string> listed;
  for (const auto& f : manifest["files"]) {
    listed.push_back(f.get<std::string>());
    EXPECT_TRUE(fs::exists(fs::path(dir) / listed.back())) << listed.back();
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_NE(std::find(listed.begin(), listed.end(), name), listed.end()) << name;
  }
  for (const char* stage : {"build-field", "learn-masks", "rank", "evaluate"}) {
    EXPECT_TRUE(manifest["stages"].contains(stage)) << stage;
  }
  const Json summary = Json::parse(Slurp(dir, "ordering_summary.json"));
  EXPECT_TRUE(summary["checks"]["greedy_lower_bound"].get<bool>());

  // Evaluate reads only model.json and rankings.csv.
  const std::string copy = TempDir("eval_copy");
  fs::create_directories(copy);
  for (const char* file : {"model.json", "rankings.csv"}) {
    fs::copy_file(fs::path(dir) / file, fs::path(copy) / file);
  }
  Evaluate(config, copy);
  for (const char* file : {"ordering_report.csv", "mask_rate_curves.csv"}) {
    EXPECT_EQ(Slurp(dir, file), Slurp(copy, file)) << file;
  }
}

TEST(BinaryTest, ExitCodes) {
  const std::string dir = TempDir("binary");
  const std::string err = (fs::path(fs::temp_directory_path()) / "collapse_cli_err.txt").string();
  std::string fast;
  for (const auto& o : kFast) fast += " --override " + o;

  EXPECT_EQ(RunCli("build-field --out " + dir + fast, err), 0);
  EXPECT_EQ(RunCli("build-field --out " + dir + " --override model.colour=1", err), 1);
  EXPECT_NE(ReadTextFile(err).find("model.colour"), std::string::npos);
  EXPECT_EQ(RunCli("rank --out " + dir + "/empty", err), 1);
  EXPECT_EQ(RunCli("build-field --out " + dir + " --override model.coupling=0.9", err), 2);
  EXPECT_NE(ReadTextFile(err).find("smallest eigenvalue"), std::string::npos);
  EXPECT_EQ(RunCli("frobnicate", err), 1);
  EXPECT_EQ(RunCli("build-field --seed -3 --out " + dir, err), 1);
  EXPECT_EQ(RunCli("--help", err), 0);
}

}  // namespace
}  // namespace collapse::cli
