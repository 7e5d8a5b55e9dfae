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

#ifndef COLLAPSE_TOOLS_COMMANDS_H_
#define COLLAPSE_TOOLS_COMMANDS_H_

#include <string>
#include <string_view>
#include <vector>

#include "experiment_config.h"

namespace collapse::cli {

inline constexpr std::string_view kVersion = "0.1.0";

// Each stage reads its inputs from `out_dir`, writes its artifacts there and
// records them in out_dir/manifest.json. Stages consume only files written by
// earlier stages. Returns the names of the files written.
std::vector<std::string> BuildField(const ExperimentConfig& config,
                                    const std::string& out_dir);
std::vector<std::string> LearnMasks(const ExperimentConfig& config,
                                    const std::string& out_dir);
std::vector<std::string> Rank(const ExperimentConfig& config,
                              const std::string& out_dir);
std::vector<std::string> Evaluate(const ExperimentConfig& config,
                                  const std::string& out_dir);
std::vector<std::string> RunAll(const ExperimentConfig& config,
                                const std::string& out_dir);

}  // namespace collapse::cli

#endif  // COLLAPSE_TOOLS_COMMANDS_H_
