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

#ifndef COLLAPSE_ORDER_EVAL_H_
#define COLLAPSE_ORDER_EVAL_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "collapse/collapse_rank.h"
#include "collapse/gaussian_field.h"

namespace collapse {

// H_c after observing the first `prefix_len` patches of `order`; realized
// patches contribute zero entropy.
double CumulativeEntropy(const GaussianModel& model, std::span<const int> order,
                         int prefix_len);

// H_c for prefix lengths 1..N.
std::vector<double> PrefixEntropies(const GaussianModel& model,
                                    std::span<const int> order);

// Throws InvalidInputError unless `order` is a permutation of 0..n-1.
void CheckPermutation(std::span<const int> order, int n);

std::vector<int> RandomOrder(int n, std::uint64_t seed);

struct OrderingReport {
  std::string ordering_name;
  std::vector<int> order;
  std::vector<double> prefix_entropies;  // prefix lengths 1..N
  // Mean L1 error of the conditional-mean prediction of the patch at each
  // position given the realized prefix before it.
  std::vector<double> position_l1;
  double sequential_l1 = 0.0;
  // Standard error of sequential_l1 over the Monte Carlo fields.
  double sequential_l1_stderr = 0.0;
  int seeds = 0;
};

using NamedOrder = std::pair<std::string, std::vector<int>>;

// Evaluates every named order plus `n_random` random orders ("random_000",
// ...). All orders share the same `n_fields` Monte Carlo fields.
std::vector<OrderingReport> CompareOrders(const GaussianModel& model,
                                          const std::vector<NamedOrder>& orders,
                                          int n_random, int n_fields,
                                          std::uint64_t seed);

inline constexpr double kRandomOrderRate = 0.1;

struct TrainingOrder {
  std::vector<int> order;
  int mask_count = 0;
  bool random_branch = false;
};

// Collapse order (highest rank first, the `mask_count` lowest-rank patches
// last) with probability 0.9, otherwise a uniformly random permutation.
TrainingOrder SampleTrainingOrder(const CollapseRanking& ranking,
                                  int mask_count, std::uint64_t rng_seed);

// Mask count drawn uniformly from {0, ..., n - 1}.
int SampleMaskCount(int n, std::uint64_t rng_seed);

// max_rate * (1 - cos(pi u / 2)); denser near 0 for uniform u.
double MaskRateSchedule(double u, double max_rate);

// `points` equally spaced rates over [0, max_rate].
std::vector<double> RateGrid(int points, double max_rate);

// Patches kept at a mask rate: ceil((1 - rate) N), at least 1.
int KeptCount(double rate, int n);

struct MaskRateCurve {
  std::string name;
  std::vector<double> rates;
  std::vector<double> accuracy;
  double auc = 0.0;
  double knee_rate = 0.0;
  bool knee_found = false;
  // Accuracy at the lowest rate is within chance; ordering claims are void.
  bool degenerate = false;
};

// Normalized trapezoid: integral of accuracy over rate divided by the span.
double AucOverMasks(std::span<const double> rates,
                    std::span<const double> accuracy);
double AucOverMasks(const MaskRateCurve& curve);

struct KneeResult {
  double rate = 0.0;
  // False when the difference curve is flat (e.g. a straight line).
  bool found = false;
  // False when the curve does not fall overall; the knee is then unreliable.
  bool decreasing = true;
};

// Kneedle for a concave decreasing curve.
KneeResult FindKnee(std::span<const double> rates,
                    std::span<const double> accuracy);
KneeResult FindKnee(const MaskRateCurve& curve);

// Two classes sharing the model's covariance whose means differ by
// `shift` marginal standard deviations on every coordinate of
// `signal_patches` (class 0 at -shift/2, class 1 at +shift/2).
std::pair<GaussianModel, GaussianModel> MakeClassPair(
    const GaussianModel& model, std::span<const int> signal_patches,
    double shift);

struct ClassifierConfig {
  int train_per_class = 1000;
  int test_per_class = 1000;
  int iterations = 400;
  double lr = 0.5;
  double l2 = 1e-4;
  double max_rate = 0.99;
  // Fraction of training samples masked by the collapse order; the rest drop
  // a random subset of the same size.
  double collapse_mix = 0.5;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct MaskedCurves {
  MaskRateCurve collapse;
  MaskRateCurve random;
};

// Trains one multinomial logistic classifier on fields with patches dropped
// per the mask-rate schedule (zero-imputed, with keep indicators appended),
// then reports top-1 accuracy at each rate when keeping the highest-ranked
// patches versus a random subset of the same size.
MaskedCurves MaskedClassifierEval(const GaussianModel& class_a,
                                  const GaussianModel& class_b,
                                  const CollapseRanking& ranking,
                                  const ClassifierConfig& config,
                                  std::span<const double> rates);

// Columns: ordering, prefix_len, H_c, l1
std::string OrderingReportsToCsv(std::span<const OrderingReport> reports);
// Columns: curve, rate, accuracy
std::string CurvesToCsv(std::span<const MaskRateCurve> curves);
std::string CurvesSummaryToJson(std::span<const MaskRateCurve> curves, int seeds);

}  // namespace collapse

#endif  // COLLAPSE_ORDER_EVAL_H_
