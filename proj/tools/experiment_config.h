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

#ifndef COLLAPSE_TOOLS_EXPERIMENT_CONFIG_H_
#define COLLAPSE_TOOLS_EXPERIMENT_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "collapse/gaussian_field.h"
#include "collapse/mask_learner.h"
#include "collapse/order_eval.h"

namespace collapse::cli {

struct ModelConfig {
  StructureSpec spec;
  int n_patches = 16;
  int patch_dim = 1;
  // Number of fields written by build-field.
  int n_samples = 16;
};

struct GraphConfig {
  double damping = 0.85;
  // "uniform" or "marginal" (per-patch marginal entropy reduction).
  std::string teleport = "uniform";
  double threshold = 0.0;
  double power_tol = 1e-14;
  int max_iter = 100000;
  double neumann_tol = 1e-12;
};

struct EvalConfig {
  int n_random = 100;
  int n_fields = 200;
  int rate_points = 34;
  // Class signal is planted on this many top-ranked patches.
  int signal_patches = 4;
  double shift = 2.0;
  ClassifierConfig classifier;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  GraphConfig graph;
  EvalConfig eval;
  std::uint64_t master_seed = 0;

  // Canonical resolved configuration, the input of ConfigHash.
  std::string json;
};

// Default configuration as pretty-printed JSON.
std::string DefaultConfigJson();

// Starts from the defaults, merges the JSON file at `config_path` (if not
// empty), applies dotted `key=value` overrides in order and finally the seed.
// Unknown keys and type mismatches raise InvalidInputError naming the key.
ExperimentConfig ResolveConfig(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               const std::int64_t* seed);

// 16 hex digits.
std::string ConfigHash(const ExperimentConfig& config);

}  // namespace collapse::cli

#endif  // COLLAPSE_TOOLS_EXPERIMENT_CONFIG_H_
