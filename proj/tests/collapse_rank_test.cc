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
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/order_eval.h"

namespace collapse {
namespace {

Eigen::MatrixXd RandomAdjacency(int n, std::mt19937_64& rng, double density) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && unit(rng) < density) a(i, j) = unit(rng);
    }
  }
  return a;
}

StructureSpec Spec(StructureKind kind, double coupling, int center = 0) {
  StructureSpec spec;
  spec.kind = kind;
  spec.coupling = coupling;
  spec.center = center;
  return spec;
}

double PrefixHc(const GaussianModel& model, const std::vector<int>& prefix) {
  double total = 0.0;
  for (double h : ConditionalEntropies(model, prefix)) total += h;
  return total;
}

TEST(BuildGraphTest, ConstantMasksGiveUniformColumns) {
  const auto graph = BuildGraph(Eigen::MatrixXd::Constant(4, 4, 0.7), 0.85);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(graph.stochastic(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-15);
    }
  }
  EXPECT_TRUE(graph.dangling_columns.empty());
  EXPECT_NEAR(graph.teleport.sum(), 1.0, 1e-12);
}

TEST(BuildGraphTest, ZeroColumnBecomesUniform) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 3, 0.4);
  a.col(1).setZero();
  const auto graph = BuildGraph(a, 0.85);
  ASSERT_EQ(graph.dangling_columns, std::vector<int>{1});
  for (int i = 0; i < 3; ++i) EXPECT_EQ(graph.stochastic(i, 1), 1.0 / 3.0);
}

TEST(BuildGraphTest, HandNormalization) {
  Eigen::Matrix3d a;
  a << 0.0, 0.2, 0.9, 0.6, 0.0, 0.3, 0.2, 0.6, 0.0;
  const auto graph = BuildGraph(a, 0.85);
  Eigen::Matrix3d expected;
  expected << 0.0, 0.25, 0.75, 0.75, 0.0, 0.25, 0.25, 0.75, 0.0;
  EXPECT_LT((graph.stochastic - expected).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::RowVectorXd sums = graph.stochastic.colwise().sum();
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(sums(j), 1.0, 1e-12);
}

TEST(BuildGraphTest, DiagonalIgnoredAndThresholdApplied) {
  Eigen::Matrix3d a;
  a << 0.9, 0.05, 0.5, 0.5, 0.7, 0.5, 0.5, 0.5, 0.1;
  const auto graph = BuildGraph(a, 0.85, {}, 0.1);
  EXPECT_EQ(graph.adjacency.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(graph.adjacency(0, 1), 0.0);
  EXPECT_EQ(graph.stochastic(2, 1), 1.0);
}

TEST(BuildGraphTest, RejectsInvalidInput) {
  EXPECT_THROW(BuildGraph(Eigen::MatrixXd::Zero(1, 1), 0.85), InvalidInputError);
  EXPECT_THROW(BuildGraph(Eigen::MatrixXd::Zero(3, 3), 1.0), InvalidInputError);
  EXPECT_THROW(BuildGraph(Eigen::MatrixXd::Zero(3, 3), 0.0), InvalidInputError);
  EXPECT_THROW(BuildGraph(Eigen::MatrixXd::Constant(3, 3, 1.2), 0.85), InvalidInputError);
  EXPECT_THROW(BuildGraph(Eigen::MatrixXd::Zero(3, 3), 0.85, Eigen::VectorXd::Zero(3)),
               InvalidInputError);
}

TEST(PagerankTest, TwoNodeHandExample) {
  Eigen::Matrix2d a;
  a << 0.0, 1.0, 0.0, 0.0;
  const auto graph = BuildGraph(a, 0.85);
  for (const auto& ranking :
       {PagerankPower(graph), PagerankNeumann(graph, NeumannTermsFor(0.85, 1e-13)),
        PagerankDirect(graph)}) {
    EXPECT_NEAR(ranking.scores(0), 0.6491, 5e-5) << RankMethodName(ranking.method);
    EXPECT_NEAR(ranking.scores(1), 0.3509, 5e-5);
    EXPECT_EQ(ranking.order, (std::vector<int>{0, 1}));
  }
  // Exact value 0.13875 / 0.21375.
  EXPECT_NEAR(PagerankDirect(graph).scores(0), 0.13875 / 0.21375, 1e-14);
}

TEST(PagerankTest, SymmetricGraphIsUniformForEveryMethod) {
  const auto graph = BuildGraph(Eigen::MatrixXd::Constant(5, 5, 0.3), 0.6);
  for (int terms : {0, 1, 7}) {
    EXPECT_LT((PagerankNeumann(graph, terms).scores.array() - 0.2).abs().maxCoeff(),
              1e-15);
  }
  EXPECT_LT((PagerankPower(graph).scores.array() - 0.2).abs().maxCoeff(), 1e-15);
  EXPECT_LT((PagerankDirect(graph).scores.array() - 0.2).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(PagerankDirect(graph).order, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(PagerankTest, TinyDampingReturnsTeleport) {
  std::mt19937_64 rng(1);
  Eigen::VectorXd beta(4);
  beta << 0.1, 0.4, 0.2, 0.3;
  const auto graph = BuildGraph(RandomAdjacency(4, rng, 0.8), 1e-9, beta);
  EXPECT_LT((PagerankPower(graph).scores - beta).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((PagerankNeumann(graph, 0).scores - beta).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PagerankTest, NeumannTailBound) {
  EXPECT_NEAR(NeumannTailBound(0.85, 10), std::pow(0.85, 11) / 0.15, 1e-15);
  const int terms = NeumannTermsFor(0.85, 1e-10);
  EXPECT_LT(NeumannTailBound(0.85, terms), 1e-10);
  EXPECT_GE(NeumannTailBound(0.85, terms - 1), 1e-10);
  std::mt19937_64 rng(2);
  const auto graph = BuildGraph(RandomAdjacency(12, rng, 0.4), 0.85);
  const auto direct = PagerankDirect(graph);
  for (int t : {5, 20, 60}) {
    const double error =
        (PagerankNeumann(graph, t).scores - direct.scores).cwiseAbs().sum();
    EXPECT_LE(error, 2.0 * NeumannTailBound(0.85, t) / (1.0 / 0.15)) << t;
  }
}

TEST(PagerankTest, PowerReportsNonConvergence) {
  std::mt19937_64 rng(3);
  const auto graph = BuildGraph(RandomAdjacency(10, rng, 0.5), 0.99);
  EXPECT_THROW(PagerankPower(graph, 1e-15, 3), NumericalError);
  EXPECT_THROW(PagerankPower(graph, 0.0, 3), InvalidInputError);
}

TEST(PagerankTest, MethodsAgreeOnRandomGraphs) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 8 << (trial % 3);
    const double density = trial % 5 == 0 ? 0.1 : 0.6;
    const auto graph = BuildGraph(RandomAdjacency(n, rng, density), 0.85);
    const auto power = PagerankPower(graph);
    const auto neumann = PagerankNeumann(graph, NeumannTermsFor(0.85, 1e-12));
    const auto direct = PagerankDirect(graph);
    EXPECT_LT((power.scores - direct.scores).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((neumann.scores - direct.scores).cwiseAbs().maxCoeff(), 1e-8);
    for (const auto* r : {&power, &neumann, &direct}) {
      EXPECT_LT(r->residual, 1e-10);
      EXPECT_NEAR(r->scores.sum(), 1.0, 1e-12);
      EXPECT_EQ(r->residual, FixedPointResidual(graph, r->scores));
    }
    EXPECT_EQ(power.order, direct.order);
    EXPECT_EQ(neumann.order, direct.order);
  }
}

TEST(PagerankTest, ScaleInvarianceOfOrder) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = RandomAdjacency(9, rng, 0.7);
  const auto base = PagerankDirect(BuildGraph(a, 0.85));
  const auto halved = PagerankDirect(BuildGraph(a * 0.5, 0.85));
  EXPECT_EQ(halved.scores, base.scores);
  const auto scaled = PagerankDirect(BuildGraph(a * 0.37, 0.85));
  EXPECT_EQ(scaled.order, base.order);
  EXPECT_LT((scaled.scores - base.scores).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PagerankTest, ConcentratedTeleportWinsAtLowDamping) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 6; ++k) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
    beta(k) = 1.0;
    const auto graph = BuildGraph(RandomAdjacency(6, rng, 0.9), 0.2, beta);
    EXPECT_EQ(PagerankDirect(graph).order.front(), k);
  }
}

TEST(OrderByScoreTest, TiesBreakByAscendingIndex) {
  Eigen::VectorXd scores(5);
  scores << 0.1, 0.3, 0.1, 0.3, 0.2;
  EXPECT_EQ(OrderByScore(scores), (std::vector<int>{1, 3, 4, 0, 2}));
  scores(3) += 1e-15;
  EXPECT_EQ(OrderByScore(scores), (std::vector<int>{1, 3, 4, 0, 2}));
  scores(3) += 1e-9;
  EXPECT_EQ(OrderByScore(scores), (std::vector<int>{3, 1, 4, 0, 2}));
}

TEST(GreedyOracleTest, IndependentModelIsAscending) {
  const auto model = BuildModel(Spec(StructureKind::kIndependent, 0.0), 6, 2, 0);
  const auto greedy = GreedyOracleOrder(model);
  EXPECT_EQ(greedy.order, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  // Observing a patch removes exactly its own entropy.
  for (double gain : greedy.gains) EXPECT_NEAR(gain, 0.5 * std::log(2 * std::numbers::pi * std::numbers::e) * 2, 1e-12);
}

TEST(GreedyOracleTest, StarCenterComesFirst) {
  const auto model = BuildModel(Spec(StructureKind::kStar, 0.4, 3), 6, 1, 1);
  EXPECT_EQ(GreedyOracleOrder(model).order.front(), 3);
  // Brute force over first choices.
  int best = -1;
  double best_value = 0.0;
  for (int j = 0; j < 6; ++j) {
    const double value = PrefixHc(model, {j});
    if (best < 0 || value < best_value) {
      best = j;
      best_value = value;
    }
  }
  EXPECT_EQ(best, 3);
}

TEST(GreedyOracleTest, StepsMatchExhaustiveSearch) {
  for (auto kind : {StructureKind::kChain, StructureKind::kStar, StructureKind::kBlock}) {
    const auto model = BuildModel(Spec(kind, 0.3), 7, 1, 2);
    const auto greedy = GreedyOracleOrder(model);
    std::vector<int> prefix;
    double current = PrefixHc(model, prefix);
    for (int k = 0; k < 3; ++k) {
      double best_gain = -1.0;
      for (int j = 0; j < 7; ++j) {
        if (std::find(prefix.begin(), prefix.end(), j) != prefix.end()) continue;
        std::vector<int> trial = prefix;
        trial.push_back(j);
        best_gain = std::max(best_gain, current - PrefixHc(model, trial));
      }
      EXPECT_NEAR(greedy.gains[static_cast<std::size_t>(k)], best_gain, 1e-12);
      prefix.push_back(greedy.order[static_cast<std::size_t>(k)]);
      current = PrefixHc(model, prefix);
    }
    // (1 - 1/e) guarantee against the best 3-subset.
    double optimum = 0.0;
    const double empty = PrefixHc(model, {});
    for (int a = 0; a < 7; ++a) {
      for (int b = a + 1; b < 7; ++b) {
        for (int c = b + 1; c < 7; ++c) {
          optimum = std::max(optimum, empty - PrefixHc(model, {a, b, c}));
        }
      }
    }
    EXPECT_GE(empty - current, (1.0 - std::exp(-1.0)) * optimum);
  }
}

TEST(GreedyOracleTest, DominatesTheRandomOrderMean) {
  for (auto kind : {StructureKind::kChain, StructureKind::kStar, StructureKind::kBlock}) {
    const auto model = BuildModel(Spec(kind, kind == StructureKind::kStar ? 0.24 : 0.3),
                                  10, 1, 3);
    const auto greedy = PrefixEntropies(model, GreedyOracleOrder(model).order);
    std::vector<double> mean(10, 0.0);
    for (std::uint64_t r = 0; r < 100; ++r) {
      const auto random = PrefixEntropies(model, RandomOrder(10, r));
      for (int k = 0; k < 10; ++k) mean[static_cast<std::size_t>(k)] += random[static_cast<std::size_t>(k)] / 100;
    }
    for (int k = 0; k < 10; ++k) {
      EXPECT_LE(greedy[static_cast<std::size_t>(k)], mean[static_cast<std::size_t>(k)] + 1e-9)
          << StructureKindName(kind) << " prefix " << k + 1;
    }
  }
}

TEST(GreedyOracleTest, DominatesEveryRandomOrderOnHubModels) {
  const auto model = BuildModel(Spec(StructureKind::kStar, 0.24), 10, 1, 3);
  const auto greedy = PrefixEntropies(model, GreedyOracleOrder(model).order);
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto random = PrefixEntropies(model, RandomOrder(10, r));
    for (int k = 0; k < 10; ++k) {
      EXPECT_LE(greedy[static_cast<std::size_t>(k)], random[static_cast<std::size_t>(k)] + 1e-9)
          << "order " << r << " prefix " << k + 1;
    }
  }
}

// Greedy is only (1 - 1/e)-optimal: on a chain it takes the middle node and
// then a neighbor of the first cut, while two well-spread nodes do better.
TEST(GreedyOracleTest, IsNotOptimalPerOrderOnChains) {
  const auto model = BuildModel(Spec(StructureKind::kChain, 0.3), 10, 1, 3);
  const auto greedy = GreedyOracleOrder(model);
  const std::vector<int> greedy_pair(greedy.order.begin(), greedy.order.begin() + 2);
  double best_pair = PrefixHc(model, greedy_pair);
  for (int a = 0; a < 10; ++a) {
    for (int b = a + 1; b < 10; ++b) best_pair = std::min(best_pair, PrefixHc(model, {a, b}));
  }
  EXPECT_LT(best_pair, PrefixHc(model, greedy_pair) - 1e-6);
}

TEST(MarginalTeleportTest, IsDistributionFavoringTheHub) {
  const auto model = BuildModel(Spec(StructureKind::kStar, 0.3, 2), 6, 1, 1);
  const auto beta = MarginalReductionTeleport(model);
  EXPECT_NEAR(beta.sum(), 1.0, 1e-12);
  EXPECT_GE(beta.minCoeff(), 0.0);
  Eigen::Index top = 0;
  beta.maxCoeff(&top);
  EXPECT_EQ(top, 2);
  const auto independent = MarginalReductionTeleport(
      BuildModel(Spec(StructureKind::kIndependent, 0.0), 4, 1, 0));
  EXPECT_LT((independent.array() - 0.25).abs().maxCoeff(), 1e-15);
}

TEST(RankingExportTest, CsvRoundTripPerMethod) {
  std::mt19937_64 rng(7);
  const auto graph = BuildGraph(RandomAdjacency(6, rng, 0.6), 0.85);
  const std::vector<CollapseRanking> rankings = {PagerankPower(graph),
                                                 PagerankDirect(graph)};
  const std::string csv = RankingsToCsv(rankings);
  const auto table = ParseCsv(csv);
  EXPECT_EQ(table.header,
            (std::vector<std::string>{"patch_index", "score", "rank", "method"}));
  EXPECT_EQ(table.rows.size(), 12u);
  const auto restored = RankingFromCsv(csv, "direct");
  EXPECT_EQ(restored.method, RankMethod::kDirect);
  EXPECT_EQ(restored.scores, rankings[1].scores);
  EXPECT_EQ(restored.order, rankings[1].order);
  EXPECT_EQ(RankingFromCsv(csv).method, RankMethod::kPower);
  EXPECT_THROW(RankingFromCsv(csv, "neumann"), InvalidInputError);
  const int top = rankings[1].order.front();
  EXPECT_EQ(table.rows[static_cast<std::size_t>(6 + top)][2], "1");
}

TEST(RankingExportTest, GraphExports) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Constant(0.5);
  a.col(2).setZero();
  const auto graph = BuildGraph(a, 0.85);
  const Eigen::MatrixXd restored = MatrixFromCsv(GraphToCsv(graph));
  EXPECT_EQ(restored, graph.adjacency);
  const std::string meta = GraphMetadataToJson(graph);
  EXPECT_NE(meta.find("dangling_columns"), std::string::npos);
  EXPECT_NE(meta.find("0.85"), std::string::npos);
  EXPECT_EQ(ParseRankMethod("neumann"), RankMethod::kNeumann);
  EXPECT_THROW(ParseRankMethod("eigen"), InvalidInputError);
}

}  // namespace
}  // namespace collapse
