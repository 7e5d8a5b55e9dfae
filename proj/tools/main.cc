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

// collapse: build a Gaussian patch field, learn selection masks, rank patches
// and evaluate the resulting order.
//
//   collapse all --out runs/star --seed 7 --override train.lambda_c=0
//
// Exit status: 0 on success, 1 on invalid input, 2 on numerical failure.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "collapse/errors.h"
#include "commands.h"
#include "experiment_config.h"

namespace {

constexpr int kExitInvalidInput = 1;
constexpr int kExitNumerical = 2;

using StageFn = std::function<std::vector<std::string>(
    const collapse::cli::ExperimentConfig&, const std::string&)>;

struct Flags {
  std::string config_path;
  std::int64_t seed = 0;
  std::string out_dir = "collapse_out";
  std::vector<std::string> overrides;
  CLI::Option* seed_option = nullptr;
};

void AddCommonFlags(CLI::App* command, Flags& flags) {
  command->add_option("--config", flags.config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  flags.seed_option =
      command->add_option("--seed", flags.seed, "Master seed (overrides the config)");
  command->add_option("--out", flags.out_dir, "Output directory")
      ->capture_default_str();
  command->add_option("--override", flags.overrides,
                      "Dotted key=value applied after --config, repeatable")
      ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch collapse pipeline on synthetic Gaussian fields"};
  app.set_version_flag("--version", std::string(collapse::cli::kVersion));
  bool print_defaults = false;
  app.add_flag("--print-default-config", print_defaults,
               "Print the default configuration and exit");
  app.require_subcommand(0, 1);

  const std::vector<std::pair<std::string, StageFn>> stages = {
      {"build-field", collapse::cli::BuildField},
      {"learn-masks", collapse::cli::LearnMasks},
      {"rank", collapse::cli::Rank},
      {"evaluate", collapse::cli::Evaluate},
      {"all", collapse::cli::RunAll}};
  const std::vector<std::string> descriptions = {
      "Sample a Gaussian model and fields",
      "Train per-target selection masks",
      "Rank patches by PageRank with three solvers",
      "Evaluate orders and masked classification",
      "Run every stage in sequence"};

  std::vector<CLI::App*> commands;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    CLI::App* command = app.add_subcommand(stages[i].first, descriptions[i]);
    commands.push_back(command);
  }
  // Each subcommand owns its flags; exactly one runs.
  std::vector<Flags> per_command(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    AddCommonFlags(commands[i], per_command[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalidInput;
  }

  if (print_defaults) {
    std::fputs(collapse::cli::DefaultConfigJson().c_str(), stdout);
    return 0;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i]->parsed()) continue;
    const Flags& f = per_command[i];
    try {
      const auto config = collapse::cli::ResolveConfig(
          f.config_path, f.overrides, f.seed_option->count() > 0 ? &f.seed : nullptr);
      const auto files = stages[i].second(config, f.out_dir);
      for (const auto& file : files) {
        std::printf("%s/%s\n", f.out_dir.c_str(), file.c_str());
      }
      return 0;
    } catch (const collapse::NumericalError& e) {
      std::fprintf(stderr, "collapse %s: numerical failure: %s\n",
                   stages[i].first.c_str(), e.what());
      return kExitNumerical;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "collapse %s: invalid input: %s\n",
                   stages[i].first.c_str(), e.what());
      return kExitInvalidInput;
    }
  }
  std::fputs(app.help().c_str(), stderr);
  return kExitInvalidInput;
}
