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

#include "collapse/collapse_rank.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "json.hpp"

namespace collapse {
namespace {

void CheckGraph(const DependencyGraph& graph) {
  const Eigen::Index n = graph.adjacency.rows();
  if (n < 2 || graph.stochastic.rows() != n || graph.stochastic.cols() != n ||
      graph.teleport.size() != n) {
    throw InvalidInputError("malformed dependency graph");
  }
  if (!(graph.damping > 0.0 && graph.damping < 1.0)) {
    throw InvalidInputError("damping must lie in (0, 1)");
  }
}

CollapseRanking Finish(const DependencyGraph& graph, Eigen::VectorXd scores,
                       RankMethod method, int iterations) {
  scores /= scores.sum();
  CollapseRanking ranking;
  ranking.residual = FixedPointResidual(graph, scores);
  ranking.order = OrderByScore(scores);
  ranking.scores = std::move(scores);
  ranking.method = method;
  ranking.iterations = iterations;
  return ranking;
}

double SumOf(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

}  // namespace

std::string_view RankMethodName(RankMethod method) {
  switch (method) {
    case RankMethod::kPower:
      return "power";
    case RankMethod::kNeumann:
      return "neumann";
    case RankMethod::kDirect:
      return "direct";
  }
  return "unknown";
}

RankMethod ParseRankMethod(std::string_view name) {
  if (name == "power") return RankMethod::kPower;
  if (name == "neumann") return RankMethod::kNeumann;
  if (name == "direct") return RankMethod::kDirect;
  throw InvalidInputError("unknown rank method '" + std::string(name) + "'");
}

std::vector<int> OrderByScore(const Eigen::VectorXd& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<long long> keys(order.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    keys[i] = std::llround(scores(static_cast<Eigen::Index>(i)) /
                           kScoreTieTolerance);
  }
  std::stable_sort(order.begin(), order.end(), [&keys](int a, int b) {
    return keys[static_cast<std::size_t>(a)] > keys[static_cast<std::size_t>(b)];
  });
  return order;
}

DependencyGraph BuildGraph(const Eigen::MatrixXd& weights, double damping,
                           const std::optional<Eigen::VectorXd>& teleport,
                           double threshold) {
  const Eigen::Index n = weights.rows();
  if (n != weights.cols()) throw InvalidInputError("adjacency must be square");
  if (n < 2) throw InvalidInputError("dependency graph needs N >= 2");
  if (!(damping > 0.0 && damping < 1.0)) {
    throw InvalidInputError("damping must lie in (0, 1)");
  }
  if (!(weights.array() >= 0.0).all() || !(weights.array() <= 1.0).all()) {
    throw InvalidInputError("adjacency entries must lie in [0, 1]");
  }
  DependencyGraph graph;
  graph.damping = damping;
  graph.adjacency = weights;
  graph.adjacency.diagonal().setZero();
  if (threshold > 0.0) {
    graph.adjacency = (graph.adjacency.array() < threshold)
                          .select(0.0, graph.adjacency);
  }
  graph.stochastic.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mass = graph.adjacency.col(j).sum();
    if (mass > 0.0) {
      graph.stochastic.col(j) = graph.adjacency.col(j) / mass;
    } else {
      graph.stochastic.col(j).setConstant(1.0 / static_cast<double>(n));
      graph.dangling_columns.push_back(static_cast<int>(j));
    }
  }
  if (teleport) {
    if (teleport->size() != n || !(teleport->array() >= 0.0).all() ||
        !(teleport->sum() > 0.0)) {
      throw InvalidInputError(
          "teleport must have length N, nonnegative entries and positive mass");
    }
    graph.teleport = *teleport / teleport->sum();
  } else {
    graph.teleport = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  return graph;
}

DependencyGraph BuildGraph(const SelectionMaskSet& masks, double damping,
                           const std::optional<Eigen::VectorXd>& teleport,
                           double threshold) {
  return BuildGraph(masks.weights(), damping, teleport, threshold);
}

double FixedPointResidual(const DependencyGraph& graph,
                          const Eigen::VectorXd& scores) {
  const double c = graph.damping;
  return (scores - ((1.0 - c) * graph.teleport + c * graph.stochastic * scores))
      .cwiseAbs()
      .maxCoeff();
}

CollapseRanking PagerankPower(const DependencyGraph& graph, double tol,
                              int max_iter) {
  CheckGraph(graph);
  if (!(tol > 0.0) || max_iter < 1) {
    throw InvalidInputError("power iteration needs tol > 0 and max_iter >= 1");
  }
  const double c = graph.damping;
  const Eigen::VectorXd restart = (1.0 - c) * graph.teleport;
  Eigen::VectorXd scores = graph.teleport;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd next = restart + c * (graph.stochastic * scores);
    const double delta = (next - scores).lpNorm<1>();
    scores = std::move(next);
    if (delta < tol) return Finish(graph, std::move(scores), RankMethod::kPower, it);
  }
  throw NumericalError("power iteration did not converge in " +
                       std::to_string(max_iter) + " sweeps (residual " +
                       std::to_string(FixedPointResidual(graph, scores)) + ")");
}

double NeumannTailBound(double damping, int terms) {
  return std::pow(damping, terms + 1) / (1.0 - damping);
}

int NeumannTermsFor(double damping, double tol) {
  if (!(damping > 0.0 && damping < 1.0) || !(tol > 0.0)) {
    throw InvalidInputError("NeumannTermsFor needs damping in (0,1), tol > 0");
  }
  // c^{T+1} < tol (1 - c)
  const double exact =
      std::log(tol * (1.0 - damping)) / std::log(damping) - 1.0;
  int terms = std::max(0, static_cast<int>(std::floor(exact)));
  while (NeumannTailBound(damping, terms) >= tol) ++terms;
  while (terms > 0 && NeumannTailBound(damping, terms - 1) < tol) --terms;
  return terms;
}

CollapseRanking PagerankNeumann(const DependencyGraph& graph, int terms) {
  CheckGraph(graph);
  if (terms < 0) throw InvalidInputError("Neumann terms must be >= 0");
  Eigen::VectorXd term = graph.teleport;
  Eigen::VectorXd sum = term;
  for (int t = 1; t <= terms; ++t) {
    term = graph.damping * (graph.stochastic * term);
    sum += term;
  }
  return Finish(graph, (1.0 - graph.damping) * sum, RankMethod::kNeumann, terms);
}

CollapseRanking PagerankDirect(const DependencyGraph& graph) {
  CheckGraph(graph);
  const Eigen::Index n = graph.size();
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - graph.damping * graph.stochastic;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  Eigen::VectorXd scores = lu.solve((1.0 - graph.damping) * graph.teleport);
  if (!scores.allFinite()) {
    throw NumericalError("direct PageRank solve produced non-finite scores");
  }
  return Finish(graph, std::move(scores), RankMethod::kDirect, 1);
}

GreedyOrder GreedyOracleOrder(const GaussianModel& model) {
  const int n = model.n_patches();
  GreedyOrder result;
  std::vector<int> observed;
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  double current = SumOf(ConditionalEntropies(model, observed));
  for (int step = 0; step < n; ++step) {
    int best = -1;
    double best_value = 0.0;
    std::vector<double> values(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      observed.push_back(j);
      values[static_cast<std::size_t>(j)] =
          SumOf(ConditionalEntropies(model, observed));
      observed.pop_back();
      if (best < 0 || values[static_cast<std::size_t>(j)] < best_value) {
        best = j;
        best_value = values[static_cast<std::size_t>(j)];
      }
    }
    // Lowest index among candidates tied with the best within round-off.
    const double slack = kScoreTieTolerance * std::max(1.0, std::abs(best_value));
    for (int j = 0; j < n; ++j) {
      if (!taken[static_cast<std::size_t>(j)] &&
          values[static_cast<std::size_t>(j)] <= best_value + slack) {
        best = j;
        best_value = values[static_cast<std::size_t>(j)];
        break;
      }
    }
    taken[static_cast<std::size_t>(best)] = 1;
    observed.push_back(best);
    result.order.push_back(best);
    result.gains.push_back(current - best_value);
    current = best_value;
  }
  return result;
}

Eigen::VectorXd MarginalReductionTeleport(const GaussianModel& model) {
  const int n = model.n_patches();
  const auto marginal = ConditionalEntropies(model, {});
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const int observed[] = {j};
    const auto conditional = ConditionalEntropies(model, observed);
    double reduction = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i != j) {
        reduction += marginal[static_cast<std::size_t>(i)] -
                     conditional[static_cast<std::size_t>(i)];
      }
    }
    beta(j) = std::max(0.0, reduction);
  }
  if (!(beta.sum() > 0.0)) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  return beta / beta.sum();
}

std::string RankingsToCsv(const std::vector<CollapseRanking>& rankings) {
  CsvTable table;
  table.header = {"patch_index", "score", "rank", "method"};
  for (const auto& ranking : rankings) {
    std::vector<int> rank_of(ranking.order.size());
    for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
      rank_of[static_cast<std::size_t>(ranking.order[pos])] =
          static_cast<int>(pos) + 1;
    }
    for (Eigen::Index i = 0; i < ranking.scores.size(); ++i) {
      table.rows.push_back({std::to_string(i), FormatReal(ranking.scores(i)),
                            std::to_string(rank_of[static_cast<std::size_t>(i)]),
                            std::string(RankMethodName(ranking.method))});
    }
  }
  return table.ToString();
}

std::string RankingToCsv(const CollapseRanking& ranking) {
  return RankingsToCsv({ranking});
}

CollapseRanking RankingFromCsv(const std::string& text,
                               std::string_view method) {
  const CsvTable table = ParseCsv(text);
  const auto col_patch = table.Column("patch_index");
  const auto col_score = table.Column("score");
  const auto col_rank = table.Column("rank");
  const auto col_method = table.Column("method");
  if (table.rows.empty()) throw InvalidInputError("ranking CSV has no rows");
  const std::string wanted =
      method.empty() ? table.rows.front()[col_method] : std::string(method);

  std::vector<std::pair<int, double>> scores;
  std::vector<std::pair<int, int>> ranks;
  for (const auto& row : table.rows) {
    if (row[col_method] != wanted) continue;
    const int patch = static_cast<int>(ParseReal(row[col_patch]));
    scores.emplace_back(patch, ParseReal(row[col_score]));
    ranks.emplace_back(static_cast<int>(ParseReal(row[col_rank])), patch);
  }
  if (scores.empty()) {
    throw InvalidInputError("ranking CSV has no rows for method '" + wanted + "'");
  }
  const auto n = static_cast<Eigen::Index>(scores.size());
  CollapseRanking ranking;
  ranking.method = ParseRankMethod(wanted);
  ranking.scores = Eigen::VectorXd::Zero(n);
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& [patch, score] : scores) {
    if (patch < 0 || patch >= n || seen[static_cast<std::size_t>(patch)]) {
      throw InvalidInputError("ranking CSV patch indices are not a permutation");
    }
    seen[static_cast<std::size_t>(patch)] = 1;
    ranking.scores(patch) = score;
  }
  std::sort(ranks.begin(), ranks.end());
  for (std::size_t pos = 0; pos < ranks.size(); ++pos) {
    if (ranks[pos].first != static_cast<int>(pos) + 1) {
      throw InvalidInputError("ranking CSV ranks are not 1..N");
    }
    ranking.order.push_back(ranks[pos].second);
  }
  return ranking;
}

std::string GraphToCsv(const DependencyGraph& graph) {
  return MatrixToCsv(graph.adjacency);
}

std::string GraphMetadataToJson(const DependencyGraph& graph) {
  nlohmann::json j;
  j["n_patches"] = graph.size();
  j["damping"] = graph.damping;
  j["teleport"] = std::vector<double>(graph.teleport.data(),
                                      graph.teleport.data() + graph.teleport.size());
  j["dangling_columns"] = graph.dangling_columns;
  return j.dump(2) + "\n";
}

}  // namespace collapse
