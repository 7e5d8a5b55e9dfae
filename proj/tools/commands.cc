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

#include "commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <system_error>

#include "collapse/collapse_rank.h"
#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/gaussian_field.h"
#include "collapse/mask_learner.h"
#include "collapse/order_eval.h"
#include "collapse/seeding.h"
#include "json.hpp"

namespace collapse::cli {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

// Slack for comparing exact entropies that went through different sums.
constexpr double kEntropySlack = 1e-9;

class Stage {
 public:
  Stage(std::string name, const ExperimentConfig& config, std::string out_dir)
      : name_(std::move(name)),
        config_(config),
        out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) {
      throw InvalidInputError("cannot create output directory '" + out_dir_ +
                              "': " + ec.message());
    }
  }

  std::uint64_t seed() const { return DeriveSeed(config_.master_seed, name_); }

  std::string Path(const std::string& file) const {
    return (fs::path(out_dir_) / file).string();
  }

  std::string Read(const std::string& file) const {
    const std::string path = Path(file);
    if (!fs::exists(path)) {
      throw InvalidInputError("missing input '" + path + "'; run the earlier stage first");
    }
    return ReadTextFile(path);
  }

  void Write(const std::string& file, const std::string& contents) {
    WriteTextFile(Path(file), contents);
    written_.push_back(file);
  }

  // Records the stage in manifest.json and returns the files written.
  std::vector<std::string> Finish() {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    const std::string hash = ConfigHash(config_);
    Json manifest;
    if (fs::exists(Path("manifest.json"))) {
      manifest = Json::parse(ReadTextFile(Path("manifest.json")), nullptr, false);
    }
    if (!manifest.is_object() || manifest.value("config_hash", "") != hash) {
      manifest = Json{{"version", std::string(kVersion)},
                      {"config_hash", hash},
                      {"stages", Json::object()},
                      {"files", Json::array()}};
    }
    manifest["stages"][name_] = {{"seconds", seconds}};
    std::set<std::string> files;
    for (const auto& f : manifest["files"]) files.insert(f.get<std::string>());
    files.insert(written_.begin(), written_.end());
    Json listed = Json::array();
    for (const auto& f : files) {
      if (fs::exists(Path(f))) listed.push_back(f);
    }
    manifest["files"] = listed;
    WriteTextFile(Path("manifest.json"), manifest.dump(2) + "\n");
    return written_;
  }

 private:
  std::string name_;
  const ExperimentConfig& config_;
  std::string out_dir_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> written_;
};

double MaxAbsDiff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Json PrefixJson(const std::vector<double>& values) {
  Json out = Json::array();
  for (double v : values) out.push_back(v);
  return out;
}

}  // namespace

std::vector<std::string> BuildField(const ExperimentConfig& config,
                                    const std::string& out_dir) {
  Stage stage("build-field", config, out_dir);
  const ModelConfig& mc = config.model;
  const GaussianModel model =
      BuildModel(mc.spec, mc.n_patches, mc.patch_dim, DeriveSeed(stage.seed(), "model"));
  std::vector<PatchField> fields;
  fields.reserve(static_cast<std::size_t>(mc.n_samples));
  for (int i = 0; i < mc.n_samples; ++i) {
    fields.push_back(Sample(model, DeriveSeed(stage.seed(), "sample",
                                              static_cast<std::uint64_t>(i))));
  }
  stage.Write("config.json", config.json);
  stage.Write("model.json", ModelToJson(model));
  stage.Write("fields.json", FieldsToJson(fields));
  return stage.Finish();
}

std::vector<std::string> LearnMasks(const ExperimentConfig& config,
                                    const std::string& out_dir) {
  Stage stage("learn-masks", config, out_dir);
  const GaussianModel model = ModelFromJson(stage.Read("model.json"));
  TrainConfig train = config.train;
  train.master_seed = stage.seed();
  const TrainResult result = Train(model, train);
  stage.Write("masks.csv", MasksToCsv(result.masks));
  stage.Write("masks.json", MasksToJson(result.masks));
  stage.Write("train_report.csv", TrainReportToCsv(result.report));
  return stage.Finish();
}

std::vector<std::string> Rank(const ExperimentConfig& config,
                              const std::string& out_dir) {
  Stage stage("rank", config, out_dir);
  const GraphConfig& gc = config.graph;
  const SelectionMaskSet masks = MasksFromJson(stage.Read("masks.json"));
  std::optional<Eigen::VectorXd> teleport;
  if (gc.teleport == "marginal") {
    teleport = MarginalReductionTeleport(ModelFromJson(stage.Read("model.json")));
  }
  const DependencyGraph graph = BuildGraph(masks, gc.damping, teleport, gc.threshold);

  const int terms = NeumannTermsFor(gc.damping, gc.neumann_tol);
  const std::vector<CollapseRanking> rankings = {
      PagerankPower(graph, gc.power_tol, gc.max_iter),
      PagerankNeumann(graph, terms), PagerankDirect(graph)};

  double max_disagreement = 0.0;
  bool orders_identical = true;
  for (std::size_t a = 0; a < rankings.size(); ++a) {
    for (std::size_t b = a + 1; b < rankings.size(); ++b) {
      max_disagreement = std::max(
          max_disagreement, MaxAbsDiff(rankings[a].scores, rankings[b].scores));
      orders_identical = orders_identical && rankings[a].order == rankings[b].order;
    }
  }
  Json agreement;
  agreement["max_disagreement"] = max_disagreement;
  agreement["orders_identical"] = orders_identical;
  agreement["neumann_terms"] = terms;
  agreement["neumann_tail_bound"] = NeumannTailBound(gc.damping, terms);
  for (const auto& r : rankings) {
    agreement["methods"][std::string(RankMethodName(r.method))] = {
        {"iterations", r.iterations}, {"residual", r.residual}};
  }

  stage.Write("graph.csv", GraphToCsv(graph));
  stage.Write("graph.json", GraphMetadataToJson(graph));
  stage.Write("rankings.csv", RankingsToCsv(rankings));
  stage.Write("rank_agreement.json", agreement.dump(2) + "\n");
  return stage.Finish();
}

std::vector<std::string> Evaluate(const ExperimentConfig& config,
                                  const std::string& out_dir) {
  Stage stage("evaluate", config, out_dir);
  const EvalConfig& ec = config.eval;
  const GaussianModel model = ModelFromJson(stage.Read("model.json"));
  const CollapseRanking ranking =
      RankingFromCsv(stage.Read("rankings.csv"), RankMethodName(RankMethod::kDirect));
  const int n = model.n_patches();
  if (ranking.scores.size() != n) {
    throw InvalidInputError("rankings.csv does not match model.json patch count");
  }

  std::vector<int> ascending(ranking.order.rbegin(), ranking.order.rend());
  const std::vector<NamedOrder> named = {
      {"collapse_descending", ranking.order},
      {"collapse_ascending", ascending},
      {"greedy_oracle", GreedyOracleOrder(model).order}};
  const std::vector<OrderingReport> reports = CompareOrders(
      model, named, ec.n_random, ec.n_fields, DeriveSeed(stage.seed(), "orders"));
  stage.Write("ordering_report.csv", OrderingReportsToCsv(reports));

  const auto& descending = reports[0].prefix_entropies;
  const auto& reversed = reports[1].prefix_entropies;
  const auto& greedy = reports[2].prefix_entropies;
  std::vector<double> random_mean(static_cast<std::size_t>(n), 0.0);
  double random_l1 = 0.0;
  for (std::size_t r = named.size(); r < reports.size(); ++r) {
    for (int k = 0; k < n; ++k) {
      random_mean[static_cast<std::size_t>(k)] +=
          reports[r].prefix_entropies[static_cast<std::size_t>(k)] / ec.n_random;
    }
    random_l1 += reports[r].sequential_l1 / ec.n_random;
  }
  bool beats_random = ec.n_random > 0;
  bool greedy_bound = true;
  for (std::size_t k = 0; k < descending.size(); ++k) {
    if (ec.n_random > 0 && descending[k] > random_mean[k] + kEntropySlack) {
      beats_random = false;
    }
    if (greedy[k] > descending[k] + kEntropySlack ||
        (ec.n_random > 0 && greedy[k] > random_mean[k] + kEntropySlack)) {
      greedy_bound = false;
    }
  }
  const std::size_t mid = static_cast<std::size_t>(n / 2 - 1);

  Json summary;
  summary["seeds"] = ec.n_fields;
  summary["midpoint_prefix"] = mid + 1;
  for (std::size_t i = 0; i < named.size(); ++i) {
    summary["orders"].push_back(
        {{"name", reports[i].ordering_name},
         {"order", reports[i].order},
         {"H_c_midpoint", reports[i].prefix_entropies[mid]},
         {"sequential_l1", reports[i].sequential_l1},
         {"sequential_l1_stderr", reports[i].sequential_l1_stderr}});
  }
  summary["random"] = {{"count", ec.n_random},
                       {"mean_prefix_entropies", PrefixJson(random_mean)},
                       {"mean_sequential_l1", random_l1}};
  summary["checks"] = {
      {"descending_le_random_mean", beats_random},
      {"descending_le_ascending_midpoint", descending[mid] <= reversed[mid] + kEntropySlack},
      {"greedy_lower_bound", greedy_bound}};
  stage.Write("ordering_summary.json", summary.dump(2) + "\n");

  const std::vector<int> signal(
      ranking.order.begin(), ranking.order.begin() + ec.signal_patches);
  const auto [class_a, class_b] = MakeClassPair(model, signal, ec.shift);
  ClassifierConfig classifier = ec.classifier;
  classifier.seed = DeriveSeed(stage.seed(), "classifier");
  const std::vector<double> rates = RateGrid(ec.rate_points, classifier.max_rate);
  const MaskedCurves curves =
      MaskedClassifierEval(class_a, class_b, ranking, classifier, rates);
  const std::vector<MaskRateCurve> both = {curves.collapse, curves.random};
  stage.Write("mask_rate_curves.csv", CurvesToCsv(both));
  stage.Write("mask_rate_summary.json", CurvesSummaryToJson(both, 1));
  return stage.Finish();
}

std::vector<std::string> RunAll(const ExperimentConfig& config,
                                const std::string& out_dir) {
  std::vector<std::string> files;
  for (auto* step : {&BuildField, &LearnMasks, &Rank, &Evaluate}) {
    const auto written = step(config, out_dir);
    files.insert(files.end(), written.begin(), written.end());
  }
  return files;
}

}  // namespace collapse::cli
