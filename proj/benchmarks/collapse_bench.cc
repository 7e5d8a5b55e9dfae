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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <Eigen/Core>

#include "collapse/collapse_rank.h"
#include "collapse/gaussian_field.h"
#include "collapse/mask_learner.h"
#include "collapse/seeding.h"

namespace collapse {
namespace {

GaussianModel StarModel(int n) {
  StructureSpec spec;
  spec.kind = StructureKind::kStar;
  spec.coupling = 0.15;
  return BuildModel(spec, n, 1, 1);
}

GaussianModel ChainModel(int n) {
  StructureSpec spec;
  spec.kind = StructureKind::kChain;
  spec.coupling = 0.45;
  return BuildModel(spec, n, 1, 1);
}

DependencyGraph RandomGraph(int n) {
  std::mt19937_64 rng(DeriveSeed(1, "bench-graph"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && unit(rng) < 0.3) a(i, j) = unit(rng);
    }
  }
  return BuildGraph(a, 0.85);
}

void BM_PagerankPower(benchmark::State& state) {
  const auto graph = RandomGraph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(PagerankPower(graph));
}
BENCHMARK(BM_PagerankPower)->Arg(16)->Arg(64)->Arg(256);

void BM_PagerankNeumann(benchmark::State& state) {
  const auto graph = RandomGraph(static_cast<int>(state.range(0)));
  const int terms = NeumannTermsFor(0.85, 1e-12);
  for (auto _ : state) benchmark::DoNotOptimize(PagerankNeumann(graph, terms));
}
BENCHMARK(BM_PagerankNeumann)->Arg(16)->Arg(64)->Arg(256);

void BM_PagerankDirect(benchmark::State& state) {
  const auto graph = RandomGraph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(PagerankDirect(graph));
}
BENCHMARK(BM_PagerankDirect)->Arg(16)->Arg(64)->Arg(256);

void BM_ConditionalEntropy(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = ChainModel(n);
  std::vector<int> given;
  for (int i = 1; i < n; i += 2) given.push_back(i);
  for (auto _ : state) benchmark::DoNotOptimize(ConditionalEntropy(model, 0, given));
}
BENCHMARK(BM_ConditionalEntropy)->Arg(16)->Arg(64);

void BM_GreedyOracle(benchmark::State& state) {
  const auto model = StarModel(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(GreedyOracleOrder(model));
}
BENCHMARK(BM_GreedyOracle)->Arg(16)->Arg(32);

void BM_EncoderStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = StarModel(n);
  const auto masks = SelectionMaskSet::FromLogits(Eigen::MatrixXd::Zero(n, n), 0.5);
  const Eigen::MatrixXd fit = SampleBatch(model, 256, 2);
  const Eigen::MatrixXd step = SampleBatch(model, 256, 3);
  const auto decoder = FitDecoder(fit, n, 0, masks, 4, 1e-3);
  EncoderStepOptions options;
  for (auto _ : state) {
    benchmark::DoNotOptimize(EncoderStep(step, 0, masks, decoder, options, 5));
  }
}
BENCHMARK(BM_EncoderStep)->Arg(16)->Arg(32);

void BM_FitDecoder(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = StarModel(n);
  const auto masks = SelectionMaskSet::FromLogits(Eigen::MatrixXd::Zero(n, n), 0.5);
  const Eigen::MatrixXd fit = SampleBatch(model, 256, 2);
  for (auto _ : state) benchmark::DoNotOptimize(FitDecoder(fit, n, 0, masks, 4, 1e-3));
}
BENCHMARK(BM_FitDecoder)->Arg(16)->Arg(32);

}  // namespace
}  // namespace collapse

BENCHMARK_MAIN();
