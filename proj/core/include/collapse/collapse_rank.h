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

#ifndef COLLAPSE_COLLAPSE_RANK_H_
#define COLLAPSE_COLLAPSE_RANK_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "collapse/gaussian_field.h"
#include "collapse/mask_learner.h"

namespace collapse {

// Patch dependency graph. adjacency(i, j) is the learned influence of patch j
// on patch i; `stochastic` is its column normalization with all-zero
// (dangling) columns replaced by 1/N.
struct DependencyGraph {
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd stochastic;
  double damping = 0.85;
  Eigen::VectorXd teleport;
  std::vector<int> dangling_columns;

  int size() const { return static_cast<int>(adjacency.rows()); }
};

enum class RankMethod { kPower, kNeumann, kDirect };

std::string_view RankMethodName(RankMethod method);
RankMethod ParseRankMethod(std::string_view name);

// Scores sum to 1; order lists patches by descending score.
struct CollapseRanking {
  Eigen::VectorXd scores;
  std::vector<int> order;
  RankMethod method = RankMethod::kDirect;
  int iterations = 0;
  // ||r - ((1 - c) beta + c P r)||_inf
  double residual = 0.0;
};

// Scores closer than this are ordered by ascending patch index.
inline constexpr double kScoreTieTolerance = 1e-12;

// Descending-score permutation; near-ties (kScoreTieTolerance) resolve to the
// smaller patch index.
std::vector<int> OrderByScore(const Eigen::VectorXd& scores);

// `teleport` defaults to uniform and is renormalized to sum to 1. Entries of
// the adjacency below `threshold` are zeroed before normalization.
DependencyGraph BuildGraph(const Eigen::MatrixXd& weights, double damping,
                           const std::optional<Eigen::VectorXd>& teleport = {},
                           double threshold = 0.0);
DependencyGraph BuildGraph(const SelectionMaskSet& masks, double damping,
                           const std::optional<Eigen::VectorXd>& teleport = {},
                           double threshold = 0.0);

double FixedPointResidual(const DependencyGraph& graph,
                          const Eigen::VectorXd& scores);

// r <- (1 - c) beta + c P r from r = beta until ||delta r||_1 < tol. Throws
// NumericalError carrying the final residual after max_iter sweeps.
CollapseRanking PagerankPower(const DependencyGraph& graph, double tol = 1e-14,
                              int max_iter = 100000);

// Normalized partial sum of c^t P^t beta, t = 0..terms. Before normalization
// the omitted tail has L1 mass at most NeumannTailBound(c, terms) * ||beta||_1.
CollapseRanking PagerankNeumann(const DependencyGraph& graph, int terms);
double NeumannTailBound(double damping, int terms);
// Smallest T with NeumannTailBound(damping, T) < tol.
int NeumannTermsFor(double damping, double tol);

// Dense LU solve of (I - cP) r = (1 - c) beta.
CollapseRanking PagerankDirect(const DependencyGraph& graph);

// Greedy minimization of the cumulative conditional entropy: each step
// observes the patch with the largest drop in sum_n H(e_n | observed).
struct GreedyOrder {
  std::vector<int> order;
  // gains[k] = H_c(prefix k) - H_c(prefix k + 1)
  std::vector<double> gains;
};
GreedyOrder GreedyOracleOrder(const GaussianModel& model);

// Experimental teleport: beta_j proportional to the summed mutual information
// between patch j and every other patch. Uniform when all vanish.
Eigen::VectorXd MarginalReductionTeleport(const GaussianModel& model);

// Columns: patch_index, score, rank, method. rank is 1 for the top patch.
std::string RankingToCsv(const CollapseRanking& ranking);
std::string RankingsToCsv(const std::vector<CollapseRanking>& rankings);
// Reads rows of one method (the first method present when empty).
CollapseRanking RankingFromCsv(const std::string& text,
                               std::string_view method = {});

std::string GraphToCsv(const DependencyGraph& graph);
// {damping, teleport, dangling_columns, n_patches}
std::string GraphMetadataToJson(const DependencyGraph& graph);

}  // namespace collapse

#endif  // COLLAPSE_COLLAPSE_RANK_H_
