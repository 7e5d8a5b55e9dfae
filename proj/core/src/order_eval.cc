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

#include "collapse/order_eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/seeding.h"
#include "json.hpp"

namespace collapse {
namespace {

constexpr double kKneeFlatTolerance = 1e-12;
constexpr double kChanceMargin = 0.05;

double Total(const std::vector<double>& values) {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

void CheckCurve(std::span<const double> rates, std::span<const double> accuracy,
                std::size_t min_points) {
  if (rates.size() != accuracy.size()) {
    throw InvalidInputError("rates and accuracy differ in length");
  }
  if (rates.size() < min_points) {
    throw InvalidInputError("curve needs at least " +
                            std::to_string(min_points) + " points");
  }
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (!(rates[i] > rates[i - 1])) {
      throw InvalidInputError("rates must be strictly increasing");
    }
  }
}

// The first k entries of a fresh random permutation of 0..n-1.
std::vector<int> RandomSubset(int n, int k, std::mt19937_64& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(all[static_cast<std::size_t>(i)],
              all[static_cast<std::size_t>(pick(rng))]);
  }
  all.resize(static_cast<std::size_t>(k));
  return all;
}

// Zero-imputed embeddings followed by keep indicators.
Eigen::RowVectorXd MaskedFeatures(const Eigen::RowVectorXd& flat, int n, int d,
                                  std::span<const int> kept) {
  Eigen::RowVectorXd features = Eigen::RowVectorXd::Zero(Eigen::Index{n} * d + n);
  for (int p : kept) {
    features.segment(Eigen::Index{p} * d, d) = flat.segment(Eigen::Index{p} * d, d);
    features(Eigen::Index{n} * d + p) = 1.0;
  }
  return features;
}

struct SoftmaxClassifier {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;

  Eigen::MatrixXd Standardize(const Eigen::MatrixXd& features) const {
    return (features.rowwise() - feature_mean).array().rowwise() /
           feature_scale.array();
  }

  // Row-wise argmax; ties resolve to the lower class.
  std::vector<int> Predict(const Eigen::MatrixXd& features) const {
    Eigen::MatrixXd logits = Standardize(features) * weights.transpose();
    logits.rowwise() += bias.transpose();
    std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best = 0;
      logits.row(r).maxCoeff(&best);
      labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return labels;
  }
};

SoftmaxClassifier FitSoftmax(const Eigen::MatrixXd& features,
                             const std::vector<int>& labels, int classes,
                             const ClassifierConfig& config) {
  const Eigen::Index samples = features.rows();
  SoftmaxClassifier model;
  model.feature_mean = features.colwise().mean();
  model.feature_scale =
      ((features.rowwise() - model.feature_mean).array().square().colwise().sum() /
       static_cast<double>(samples))
          .sqrt()
          .matrix();
  for (Eigen::Index c = 0; c < model.feature_scale.size(); ++c) {
    if (!(model.feature_scale(c) > 1e-12)) model.feature_scale(c) = 1.0;
  }
  const Eigen::MatrixXd x = model.Standardize(features);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(samples, classes);
  for (Eigen::Index r = 0; r < samples; ++r) {
    onehot(r, labels[static_cast<std::size_t>(r)]) = 1.0;
  }
  model.weights = Eigen::MatrixXd::Zero(classes, features.cols());
  model.bias = Eigen::VectorXd::Zero(classes);
  for (int it = 0; it < config.iterations; ++it) {
    Eigen::MatrixXd prob = x * model.weights.transpose();
    prob.rowwise() += model.bias.transpose();
    for (Eigen::Index r = 0; r < samples; ++r) {
      const double top = prob.row(r).maxCoeff();
      prob.row(r) = (prob.row(r).array() - top).exp().matrix();
      prob.row(r) /= prob.row(r).sum();
    }
    const Eigen::MatrixXd error = (prob - onehot) / static_cast<double>(samples);
    const Eigen::MatrixXd grad_w =
        error.transpose() * x + config.l2 * model.weights;
    const Eigen::VectorXd grad_b = error.colwise().sum().transpose();
    model.weights -= config.lr * grad_w;
    model.bias -= config.lr * grad_b;
  }
  if (!model.weights.allFinite()) {
    throw NumericalError("classifier training produced non-finite weights");
  }
  return model;
}

}  // namespace

void CheckPermutation(std::span<const int> order, int n) {
  if (static_cast<int>(order.size()) != n) {
    throw InvalidInputError("order has " + std::to_string(order.size()) +
                            " entries, expected " + std::to_string(n));
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int p : order) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
      throw InvalidInputError("order is not a permutation");
    }
    seen[static_cast<std::size_t>(p)] = 1;
  }
}

double CumulativeEntropy(const GaussianModel& model, std::span<const int> order,
                         int prefix_len) {
  CheckPermutation(order, model.n_patches());
  if (prefix_len < 0 || prefix_len > model.n_patches()) {
    throw InvalidInputError("prefix_len out of range");
  }
  return Total(ConditionalEntropies(
      model, order.first(static_cast<std::size_t>(prefix_len))));
}

std::vector<double> PrefixEntropies(const GaussianModel& model,
                                    std::span<const int> order) {
  CheckPermutation(order, model.n_patches());
  std::vector<double> out;
  for (int k = 1; k <= model.n_patches(); ++k) {
    out.push_back(Total(
        ConditionalEntropies(model, order.first(static_cast<std::size_t>(k)))));
  }
  return out;
}

std::vector<int> RandomOrder(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return RandomSubset(n, n, rng);
}

std::vector<OrderingReport> CompareOrders(const GaussianModel& model,
                                          const std::vector<NamedOrder>& orders,
                                          int n_random, int n_fields,
                                          std::uint64_t seed) {
  if (n_random < 0 || n_fields < 2) {
    throw InvalidInputError("CompareOrders needs n_random >= 0, n_fields >= 2");
  }
  const int n = model.n_patches();
  const int d = model.patch_dim();
  std::vector<NamedOrder> all = orders;
  for (int i = 0; i < n_random; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "random_%03d", i);
    all.emplace_back(name, RandomOrder(n, DeriveSeed(seed, "random-order",
                                                     static_cast<std::uint64_t>(i))));
  }
  const Eigen::MatrixXd fields =
      SampleBatch(model, n_fields, DeriveSeed(seed, "sequential-fields"));

  std::vector<OrderingReport> reports;
  for (const auto& [name, order] : all) {
    CheckPermutation(order, n);
    OrderingReport report;
    report.ordering_name = name;
    report.order = order;
    report.prefix_entropies = PrefixEntropies(model, order);
    report.seeds = n_fields;

    Eigen::VectorXd per_field = Eigen::VectorXd::Zero(n_fields);
    std::vector<int> prefix;
    for (int pos = 0; pos < n; ++pos) {
      const int target = order[static_cast<std::size_t>(pos)];
      const auto predictor = ConditionalPredictor(model, target, prefix);
      double position_total = 0.0;
      for (int f = 0; f < n_fields; ++f) {
        Eigen::VectorXd observed(static_cast<Eigen::Index>(prefix.size()) * d);
        for (std::size_t k = 0; k < prefix.size(); ++k) {
          observed.segment(static_cast<Eigen::Index>(k) * d, d) =
              fields.row(f).segment(Eigen::Index{prefix[k]} * d, d).transpose();
        }
        Eigen::VectorXd prediction = predictor.offset;
        if (!prefix.empty()) prediction += predictor.gain * observed;
        const double err =
            (fields.row(f).segment(Eigen::Index{target} * d, d).transpose() -
             prediction)
                .cwiseAbs()
                .sum();
        per_field(f) += err / static_cast<double>(n);
        position_total += err;
      }
      report.position_l1.push_back(position_total / static_cast<double>(n_fields));
      prefix.push_back(target);
    }
    report.sequential_l1 = per_field.mean();
    const double var = (per_field.array() - report.sequential_l1).square().sum() /
                       static_cast<double>(n_fields - 1);
    report.sequential_l1_stderr = std::sqrt(var / static_cast<double>(n_fields));
    reports.push_back(std::move(report));
  }
  return reports;
}

TrainingOrder SampleTrainingOrder(const CollapseRanking& ranking,
                                  int mask_count, std::uint64_t rng_seed) {
  const int n = static_cast<int>(ranking.order.size());
  CheckPermutation(ranking.order, n);
  if (mask_count < 0 || mask_count > n) {
    throw InvalidInputError("mask_count must lie in [0, N]");
  }
  std::mt19937_64 rng(rng_seed);
  std::bernoulli_distribution random_branch(kRandomOrderRate);
  TrainingOrder out;
  out.mask_count = mask_count;
  out.random_branch = random_branch(rng);
  out.order = out.random_branch ? RandomSubset(n, n, rng) : ranking.order;
  return out;
}

int SampleMaskCount(int n, std::uint64_t rng_seed) {
  if (n < 1) throw InvalidInputError("SampleMaskCount needs n >= 1");
  std::mt19937_64 rng(rng_seed);
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

double MaskRateSchedule(double u, double max_rate) {
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInputError("u must lie in [0, 1]");
  if (!(max_rate > 0.0 && max_rate <= 0.99)) {
    throw InvalidInputError("max_rate must lie in (0, 0.99]");
  }
  if (u == 1.0) return max_rate;
  return max_rate * (1.0 - std::cos(std::numbers::pi * u / 2.0));
}

std::vector<double> RateGrid(int points, double max_rate) {
  if (points < 2) throw InvalidInputError("rate grid needs >= 2 points");
  if (!(max_rate > 0.0 && max_rate <= 0.99)) {
    throw InvalidInputError("max_rate must lie in (0, 0.99]");
  }
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(max_rate * static_cast<double>(i) /
                   static_cast<double>(points - 1));
  }
  grid.back() = max_rate;
  return grid;
}

int KeptCount(double rate, int n) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidInputError("rate must lie in [0, 1)");
  const double kept = std::ceil((1.0 - rate) * static_cast<double>(n) - 1e-9);
  return std::clamp(static_cast<int>(kept), 1, n);
}

double AucOverMasks(std::span<const double> rates,
                    std::span<const double> accuracy) {
  CheckCurve(rates, accuracy, 2);
  double area = 0.0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    area += 0.5 * (accuracy[i] + accuracy[i - 1]) * (rates[i] - rates[i - 1]);
  }
  return area / (rates.back() - rates.front());
}

double AucOverMasks(const MaskRateCurve& curve) {
  return AucOverMasks(curve.rates, curve.accuracy);
}

KneeResult FindKnee(std::span<const double> rates,
                    std::span<const double> accuracy) {
  CheckCurve(rates, accuracy, 3);
  KneeResult result;
  result.rate = rates.front();
  result.decreasing = accuracy.back() < accuracy.front();
  const auto [acc_lo, acc_hi] = std::minmax_element(accuracy.begin(), accuracy.end());
  const double x_span = rates.back() - rates.front();
  const double y_span = *acc_hi - *acc_lo;
  if (!(y_span > 0.0)) return result;

  double best = -1.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double x = (rates[i] - rates.front()) / x_span;
    const double y = (accuracy[i] - *acc_lo) / y_span;
    // Distance above the falling diagonal from (0, 1) to (1, 0).
    const double diff = y - (1.0 - x);
    if (diff > best + kKneeFlatTolerance) {
      best = diff;
      result.rate = rates[i];
    }
  }
  result.found = best > kKneeFlatTolerance;
  if (!result.found) result.rate = rates.front();
  return result;
}

KneeResult FindKnee(const MaskRateCurve& curve) {
  return FindKnee(curve.rates, curve.accuracy);
}

std::pair<GaussianModel, GaussianModel> MakeClassPair(
    const GaussianModel& model, std::span<const int> signal_patches,
    double shift) {
  if (!std::isfinite(shift)) throw InvalidInputError("shift must be finite");
  const int d = model.patch_dim();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(model.dimension());
  for (int p : signal_patches) {
    if (p < 0 || p >= model.n_patches()) {
      throw InvalidInputError("signal patch out of range");
    }
    for (int k = 0; k < d; ++k) {
      const Eigen::Index idx = model.Offset(p) + k;
      delta(idx) = 0.5 * shift * std::sqrt(model.covariance()(idx, idx));
    }
  }
  return {model.WithMean(model.mean() - delta), model.WithMean(model.mean() + delta)};
}

void ClassifierConfig::Validate() const {
  if (train_per_class < 1 || test_per_class < 1) {
    throw InvalidInputError("classifier sample counts must be >= 1");
  }
  if (iterations < 1 || !(lr > 0.0) || !(l2 >= 0.0)) {
    throw InvalidInputError("classifier optimizer settings are invalid");
  }
  if (!(max_rate > 0.0 && max_rate <= 0.99)) {
    throw InvalidInputError("classifier max_rate must lie in (0, 0.99]");
  }
  if (!(collapse_mix >= 0.0 && collapse_mix <= 1.0)) {
    throw InvalidInputError("collapse_mix must lie in [0, 1]");
  }
}

MaskedCurves MaskedClassifierEval(const GaussianModel& class_a,
                                  const GaussianModel& class_b,
                                  const CollapseRanking& ranking,
                                  const ClassifierConfig& config,
                                  std::span<const double> rates) {
  config.Validate();
  const int n = class_a.n_patches();
  const int d = class_a.patch_dim();
  if (class_b.n_patches() != n || class_b.patch_dim() != d) {
    throw InvalidInputError("class models differ in shape");
  }
  if ((class_a.precision() - class_b.precision()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInputError("class models must share their covariance");
  }
  CheckPermutation(ranking.order, n);
  CheckCurve(rates, rates, 1);
  for (double r : rates) KeptCount(r, n);

  const std::uint64_t seed = config.seed;
  const Eigen::Index features = Eigen::Index{n} * d + n;

  // Training set with per-sample scheduled masking.
  const int train_total = 2 * config.train_per_class;
  Eigen::MatrixXd train_x(train_total, features);
  std::vector<int> train_y(static_cast<std::size_t>(train_total));
  {
    const Eigen::MatrixXd a =
        SampleBatch(class_a, config.train_per_class, DeriveSeed(seed, "train-a"));
    const Eigen::MatrixXd b =
        SampleBatch(class_b, config.train_per_class, DeriveSeed(seed, "train-b"));
    std::mt19937_64 rng(DeriveSeed(seed, "train-masking"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < train_total; ++s) {
      const bool second = s >= config.train_per_class;
      const Eigen::RowVectorXd flat =
          second ? b.row(s - config.train_per_class) : a.row(s);
      const int keep = KeptCount(MaskRateSchedule(unit(rng), config.max_rate), n);
      const bool by_rank = unit(rng) < config.collapse_mix;
      std::vector<int> kept =
          by_rank ? std::vector<int>(ranking.order.begin(),
                                     ranking.order.begin() + keep)
                  : RandomSubset(n, keep, rng);
      train_x.row(s) = MaskedFeatures(flat, n, d, kept);
      train_y[static_cast<std::size_t>(s)] = second ? 1 : 0;
    }
  }
  const SoftmaxClassifier classifier = FitSoftmax(train_x, train_y, 2, config);

  const Eigen::MatrixXd test_a =
      SampleBatch(class_a, config.test_per_class, DeriveSeed(seed, "test-a"));
  const Eigen::MatrixXd test_b =
      SampleBatch(class_b, config.test_per_class, DeriveSeed(seed, "test-b"));
  const int test_total = 2 * config.test_per_class;

  MaskedCurves curves;
  curves.collapse.name = "collapse";
  curves.random.name = "random";
  for (std::size_t ri = 0; ri < rates.size(); ++ri) {
    const int keep = KeptCount(rates[ri], n);
    const std::vector<int> top(ranking.order.begin(), ranking.order.begin() + keep);
    std::mt19937_64 rng(DeriveSeed(seed, "eval-random", ri));
    Eigen::MatrixXd by_rank(test_total, features);
    Eigen::MatrixXd by_chance(test_total, features);
    std::vector<int> labels(static_cast<std::size_t>(test_total));
    for (int s = 0; s < test_total; ++s) {
      const bool second = s >= config.test_per_class;
      const Eigen::RowVectorXd flat =
          second ? test_b.row(s - config.test_per_class) : test_a.row(s);
      by_rank.row(s) = MaskedFeatures(flat, n, d, top);
      by_chance.row(s) = MaskedFeatures(flat, n, d, RandomSubset(n, keep, rng));
      labels[static_cast<std::size_t>(s)] = second ? 1 : 0;
    }
    auto accuracy = [&labels](const std::vector<int>& predicted) {
      int hits = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
      return static_cast<double>(hits) / static_cast<double>(labels.size());
    };
    curves.collapse.accuracy.push_back(accuracy(classifier.Predict(by_rank)));
    curves.random.accuracy.push_back(accuracy(classifier.Predict(by_chance)));
  }
  for (MaskRateCurve* curve : {&curves.collapse, &curves.random}) {
    curve->rates.assign(rates.begin(), rates.end());
    curve->degenerate = curve->accuracy.front() < 0.5 + kChanceMargin;
    if (curve->rates.size() >= 2) curve->auc = AucOverMasks(*curve);
    if (curve->rates.size() >= 3) {
      const auto knee = FindKnee(*curve);
      curve->knee_rate = knee.rate;
      curve->knee_found = knee.found;
    }
  }
  return curves;
}

std::string OrderingReportsToCsv(std::span<const OrderingReport> reports) {
  CsvTable table;
  table.header = {"ordering", "prefix_len", "H_c", "l1"};
  for (const auto& report : reports) {
    for (std::size_t k = 0; k < report.prefix_entropies.size(); ++k) {
      table.rows.push_back({report.ordering_name, std::to_string(k + 1),
                            FormatReal(report.prefix_entropies[k]),
                            FormatReal(report.position_l1[k])});
    }
  }
  return table.ToString();
}

std::string CurvesToCsv(std::span<const MaskRateCurve> curves) {
  CsvTable table;
  table.header = {"curve", "rate", "accuracy"};
  for (const auto& curve : curves) {
    for (std::size_t i = 0; i < curve.rates.size(); ++i) {
      table.rows.push_back({curve.name, FormatReal(curve.rates[i]),
                            FormatReal(curve.accuracy[i])});
    }
  }
  return table.ToString();
}

std::string CurvesSummaryToJson(std::span<const MaskRateCurve> curves,
                                int seeds) {
  nlohmann::json j;
  j["seeds"] = seeds;
  j["curves"] = nlohmann::json::array();
  for (const auto& curve : curves) {
    j["curves"].push_back({{"name", curve.name},
                           {"auc", curve.auc},
                           {"knee_rate", curve.knee_rate},
                           {"knee_found", curve.knee_found},
                           {"degenerate", curve.degenerate}});
  }
  return j.dump(2) + "\n";
}

}  // namespace collapse
