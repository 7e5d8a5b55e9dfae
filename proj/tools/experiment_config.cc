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

#include "experiment_config.h"

#include <cstdio>
#include <utility>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/seeding.h"
#include "json.hpp"

namespace collapse::cli {
namespace {

using Json = nlohmann::json;

Json DefaultJson() {
  const ExperimentConfig defaults;
  const TrainConfig& t = defaults.train;
  const GraphConfig& g = defaults.graph;
  const EvalConfig& e = defaults.eval;
  const ClassifierConfig& c = e.classifier;
  Json j;
  j["master_seed"] = defaults.master_seed;
  j["model"] = {{"kind", "star"},
                {"n_patches", defaults.model.n_patches},
                {"patch_dim", defaults.model.patch_dim},
                {"coupling", 0.24},
                {"center", 0},
                {"block_size", 4},
                {"blocks", Json::array()},
                {"n_samples", defaults.model.n_samples}};
  j["train"] = {{"epochs", t.epochs},
                {"steps_per_epoch", t.steps_per_epoch},
                {"batch_size", t.batch_size},
                {"lr", t.lr},
                {"sigma", t.sigma},
                {"lambda_c", t.lambda_c},
                {"tau", t.tau},
                {"ridge_lambda", t.ridge_lambda},
                {"record_wall_clock", t.record_wall_clock}};
  j["graph"] = {{"damping", g.damping},
                {"teleport", g.teleport},
                {"threshold", g.threshold},
                {"power_tol", g.power_tol},
                {"max_iter", g.max_iter},
                {"neumann_tol", g.neumann_tol}};
  j["eval"] = {{"n_random", e.n_random},
               {"n_fields", e.n_fields},
               {"rate_points", e.rate_points},
               {"max_rate", c.max_rate},
               {"signal_patches", e.signal_patches},
               {"shift", e.shift},
               {"classifier",
                {{"train_per_class", c.train_per_class},
                 {"test_per_class", c.test_per_class},
                 {"iterations", c.iterations},
                 {"lr", c.lr},
                 {"l2", c.l2},
                 {"collapse_mix", c.collapse_mix}}}};
  return j;
}

bool SameKind(const Json& base, const Json& value) {
  if (base.is_boolean()) return value.is_boolean();
  if (base.is_number_integer()) return value.is_number_integer();
  if (base.is_number()) return value.is_number();
  if (base.is_string()) return value.is_string();
  if (base.is_array()) return value.is_array();
  return false;
}

void MergeStrict(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) {
    throw InvalidInputError("config key '" + (prefix.empty() ? "<root>" : prefix) +
                            "' must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) {
      throw InvalidInputError("unknown config key '" + key + "'");
    }
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      MergeStrict(slot, it.value(), key);
    } else if (!SameKind(slot, it.value())) {
      throw InvalidInputError("config key '" + key + "' has the wrong type");
    } else {
      slot = it.value();
    }
  }
}

Json OverridePatch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidInputError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  Json patch = std::move(value);
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(begin, end - begin);
    if (part.empty()) {
      throw InvalidInputError("override key '" + key + "' is malformed");
    }
    patch = Json{{part, std::move(patch)}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

template <typename T>
T Get(const Json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<T>();
}

[[noreturn]] void Reject(const std::string& key, const std::string& why) {
  throw InvalidInputError("config key '" + key + "' " + why);
}

ExperimentConfig Typed(const Json& j) {
  ExperimentConfig config;
  if (!j.at("master_seed").is_number_unsigned()) {
    Reject("master_seed", "must be a non-negative integer");
  }
  config.master_seed = j.at("master_seed").get<std::uint64_t>();

  ModelConfig& model = config.model;
  try {
    model.spec.kind = ParseStructureKind(Get<std::string>(j, "model", "kind"));
  } catch (const InvalidInputError& e) {
    Reject("model.kind", std::string("is invalid: ") + e.what());
  }
  model.spec.coupling = Get<double>(j, "model", "coupling");
  model.spec.center = Get<int>(j, "model", "center");
  model.spec.block_size = Get<int>(j, "model", "block_size");
  for (const auto& block : j.at("model").at("blocks")) {
    if (!block.is_array()) Reject("model.blocks", "must be a list of index lists");
    std::vector<int> members;
    for (const auto& index : block) {
      if (!index.is_number_integer()) Reject("model.blocks", "must hold integers");
      members.push_back(index.get<int>());
    }
    model.spec.blocks.push_back(std::move(members));
  }
  model.n_patches = Get<int>(j, "model", "n_patches");
  model.patch_dim = Get<int>(j, "model", "patch_dim");
  model.n_samples = Get<int>(j, "model", "n_samples");
  if (model.n_patches < 2) Reject("model.n_patches", "must be >= 2");
  if (model.patch_dim < 1) Reject("model.patch_dim", "must be >= 1");
  if (model.n_samples < 1) Reject("model.n_samples", "must be >= 1");
  if (model.spec.coupling < 0.0) Reject("model.coupling", "must be >= 0");

  TrainConfig& train = config.train;
  train.epochs = Get<int>(j, "train", "epochs");
  train.steps_per_epoch = Get<int>(j, "train", "steps_per_epoch");
  train.batch_size = Get<int>(j, "train", "batch_size");
  train.lr = Get<double>(j, "train", "lr");
  train.sigma = Get<double>(j, "train", "sigma");
  train.lambda_c = Get<double>(j, "train", "lambda_c");
  train.tau = Get<double>(j, "train", "tau");
  train.ridge_lambda = Get<double>(j, "train", "ridge_lambda");
  train.record_wall_clock = Get<bool>(j, "train", "record_wall_clock");
  try {
    train.Validate();
  } catch (const InvalidInputError& e) {
    throw InvalidInputError(std::string("config section 'train': ") + e.what());
  }

  GraphConfig& graph = config.graph;
  graph.damping = Get<double>(j, "graph", "damping");
  graph.teleport = Get<std::string>(j, "graph", "teleport");
  graph.threshold = Get<double>(j, "graph", "threshold");
  graph.power_tol = Get<double>(j, "graph", "power_tol");
  graph.max_iter = Get<int>(j, "graph", "max_iter");
  graph.neumann_tol = Get<double>(j, "graph", "neumann_tol");
  if (!(graph.damping > 0.0 && graph.damping < 1.0)) {
    Reject("graph.damping", "must lie in (0, 1)");
  }
  if (graph.teleport != "uniform" && graph.teleport != "marginal") {
    Reject("graph.teleport", "must be 'uniform' or 'marginal'");
  }
  if (graph.threshold < 0.0) Reject("graph.threshold", "must be >= 0");
  if (!(graph.power_tol > 0.0)) Reject("graph.power_tol", "must be > 0");
  if (graph.max_iter < 1) Reject("graph.max_iter", "must be >= 1");
  if (!(graph.neumann_tol > 0.0)) Reject("graph.neumann_tol", "must be > 0");

  EvalConfig& eval = config.eval;
  eval.n_random = Get<int>(j, "eval", "n_random");
  eval.n_fields = Get<int>(j, "eval", "n_fields");
  eval.rate_points = Get<int>(j, "eval", "rate_points");
  eval.signal_patches = Get<int>(j, "eval", "signal_patches");
  eval.shift = Get<double>(j, "eval", "shift");
  if (eval.n_random < 0) Reject("eval.n_random", "must be >= 0");
  if (eval.n_fields < 2) Reject("eval.n_fields", "must be >= 2");
  if (eval.rate_points < 3) Reject("eval.rate_points", "must be >= 3");
  if (eval.signal_patches < 1 || eval.signal_patches > model.n_patches) {
    Reject("eval.signal_patches", "must lie in [1, model.n_patches]");
  }
  if (!(eval.shift > 0.0)) Reject("eval.shift", "must be > 0");

  const Json& cj = j.at("eval").at("classifier");
  ClassifierConfig& classifier = eval.classifier;
  classifier.max_rate = j.at("eval").at("max_rate").get<double>();
  classifier.train_per_class = cj.at("train_per_class").get<int>();
  classifier.test_per_class = cj.at("test_per_class").get<int>();
  classifier.iterations = cj.at("iterations").get<int>();
  classifier.lr = cj.at("lr").get<double>();
  classifier.l2 = cj.at("l2").get<double>();
  classifier.collapse_mix = cj.at("collapse_mix").get<double>();
  try {
    classifier.Validate();
  } catch (const InvalidInputError& e) {
    throw InvalidInputError(std::string("config section 'eval': ") + e.what());
  }

  config.json = j.dump(2) + "\n";
  return config;
}

}  // namespace

std::string DefaultConfigJson() { return DefaultJson().dump(2) + "\n"; }

ExperimentConfig ResolveConfig(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               const std::int64_t* seed) {
  Json resolved = DefaultJson();
  if (!config_path.empty()) {
    const Json file = Json::parse(ReadTextFile(config_path), nullptr,
                                  /*allow_exceptions=*/false);
    if (file.is_discarded()) {
      throw InvalidInputError("config file '" + config_path + "' is not valid JSON");
    }
    MergeStrict(resolved, file, "");
  }
  for (const auto& assignment : overrides) {
    MergeStrict(resolved, OverridePatch(assignment), "");
  }
  if (seed != nullptr) {
    if (*seed < 0) Reject("master_seed", "must be a non-negative integer");
    resolved["master_seed"] = static_cast<std::uint64_t>(*seed);
  }
  return Typed(resolved);
}

std::string ConfigHash(const ExperimentConfig& config) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(HashName(config.json)));
  return hex;
}

}  // namespace collapse::cli
