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

#include "collapse/mask_learner.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "collapse/csv.h"
#include "collapse/errors.h"
#include "collapse/seeding.h"
#include "json.hpp"

namespace collapse {
namespace {

using Json = nlohmann::json;

constexpr double kLogitClamp = 1e-12;
constexpr double kDivergenceFactor = 1e3;

double Logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double Logit(double w) {
  const double clamped = std::clamp(w, kLogitClamp, 1.0 - kLogitClamp);
  return std::log(clamped / (1.0 - clamped));
}

// d alpha / d w
double AlphaSlope(double w, double sigma) {
  return Alpha(w, sigma) * (1.0 - w) / (sigma * sigma);
}

int PatchCount(const Eigen::MatrixXd& batch, int n_patches) {
  if (n_patches < 2) throw InvalidInputError("mask learning needs N >= 2");
  if (batch.cols() % n_patches != 0) {
    throw InvalidInputError("batch width is not a multiple of n_patches");
  }
  return static_cast<int>(batch.cols() / n_patches);
}

void CheckTarget(int target, int n_patches) {
  if (target < 0 || target >= n_patches) {
    throw InvalidInputError("target patch " + std::to_string(target) +
                            " out of range");
  }
}

void CheckDecoder(const LinearDecoder& decoder, int n_patches, int d) {
  if (decoder.weights.rows() != d ||
      decoder.weights.cols() != Eigen::Index{n_patches - 1} * d ||
      decoder.bias.size() != d) {
    throw InvalidInputError("decoder shape does not match the batch");
  }
}

Eigen::MatrixXd TargetBlock(const Eigen::MatrixXd& batch, int target, int d) {
  return batch.middleCols(Eigen::Index{target} * d, d);
}

struct ReconstructionTerm {
  double loss = 0.0;
  Eigen::VectorXd grad_weights;  // d loss / d w_target, length N
  double min_abs_residual = 0.0;
};

ReconstructionTerm EvaluateReconstruction(const Eigen::MatrixXd& batch,
                                          int n_patches, int target,
                                          const Eigen::VectorXd& mask_row,
                                          double sigma,
                                          const LinearDecoder& decoder,
                                          const Eigen::MatrixXd& noise) {
  const int d = PatchCount(batch, n_patches);
  CheckDecoder(decoder, n_patches, d);
  const Eigen::Index batch_size = batch.rows();
  if (batch_size < 1) throw InvalidInputError("empty batch");
  const Eigen::MatrixXd design =
      NoiseInjectBatch(batch, n_patches, target, mask_row, sigma, noise);
  Eigen::MatrixXd residual = TargetBlock(batch, target, d) -
                             design * decoder.weights.transpose();
  residual.rowwise() -= decoder.bias.transpose();

  ReconstructionTerm term;
  term.loss = residual.cwiseAbs().sum() / static_cast<double>(batch_size);
  term.min_abs_residual = residual.cwiseAbs().minCoeff();
  const Eigen::MatrixXd signs = residual.unaryExpr(
      [](double r) { return static_cast<double>((r > 0.0) - (r < 0.0)); });
  // d loss / d design
  const Eigen::MatrixXd upstream =
      -(signs * decoder.weights) / static_cast<double>(batch_size);

  term.grad_weights = Eigen::VectorXd::Zero(n_patches);
  Eigen::Index block = 0;
  for (int i = 0; i < n_patches; ++i) {
    if (i == target) continue;
    const auto cols = Eigen::seqN(Eigen::Index{i} * d, d);
    const double d_alpha =
        (upstream.middleCols(block * d, d).array() *
         (batch(Eigen::all, cols) - noise(Eigen::all, cols)).array())
            .sum();
    term.grad_weights(i) = d_alpha * AlphaSlope(mask_row(i), sigma);
    ++block;
  }
  return term;
}

void CheckFinite(const Eigen::VectorXd& gradient, int target) {
  if (!gradient.allFinite()) {
    throw NumericalError("non-finite encoder gradient for target " +
                         std::to_string(target));
  }
}

}  // namespace

SelectionMaskSet::SelectionMaskSet(Eigen::MatrixXd logits,
                                   Eigen::MatrixXd weights, double sigma)
    : logits_(std::move(logits)), weights_(std::move(weights)), sigma_(sigma) {}

SelectionMaskSet SelectionMaskSet::Uniform(int n_patches, double sigma) {
  return FromLogits(Eigen::MatrixXd::Zero(n_patches, n_patches), sigma);
}

SelectionMaskSet SelectionMaskSet::FromLogits(Eigen::MatrixXd logits,
                                              double sigma) {
  if (logits.rows() != logits.cols() || logits.rows() < 1) {
    throw InvalidInputError("mask logits must be a non-empty square matrix");
  }
  if (!(sigma > 0.0)) throw InvalidInputError("sigma must be > 0");
  if (!logits.allFinite()) throw InvalidInputError("mask logits must be finite");
  Eigen::MatrixXd weights = logits.unaryExpr(&Logistic);
  weights.diagonal().setZero();
  logits.diagonal().setZero();
  return SelectionMaskSet(std::move(logits), std::move(weights), sigma);
}

SelectionMaskSet SelectionMaskSet::FromWeights(Eigen::MatrixXd weights,
                                               double sigma) {
  if (weights.rows() != weights.cols() || weights.rows() < 1) {
    throw InvalidInputError("mask weights must be a non-empty square matrix");
  }
  if (!(sigma > 0.0)) throw InvalidInputError("sigma must be > 0");
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      const double w = weights(r, c);
      if (!(w >= 0.0 && w <= 1.0)) {
        throw InvalidInputError("mask entry (" + std::to_string(r) + ", " +
                                std::to_string(c) + ") outside [0, 1]");
      }
    }
  }
  weights.diagonal().setZero();
  Eigen::MatrixXd logits = weights.unaryExpr(&Logit);
  logits.diagonal().setZero();
  return SelectionMaskSet(std::move(logits), std::move(weights), sigma);
}

void SelectionMaskSet::SetLogitsRow(int target, const Eigen::VectorXd& logits) {
  CheckTarget(target, size());
  if (logits.size() != size()) throw InvalidInputError("logit row length");
  if (!logits.allFinite()) throw NumericalError("non-finite mask logits");
  logits_.row(target) = logits.transpose();
  logits_(target, target) = 0.0;
  weights_.row(target) = logits.transpose().unaryExpr(&Logistic);
  weights_(target, target) = 0.0;
}

double Alpha(double w, double sigma) {
  const double gap = 1.0 - w;
  return std::exp(-(gap * gap) / (2.0 * sigma * sigma));
}

Eigen::MatrixXd InjectionNoise(int batch_size, int dimension,
                               std::uint64_t noise_seed) {
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd noise(batch_size, dimension);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    for (Eigen::Index k = 0; k < dimension; ++k) noise(b, k) = normal(rng);
  }
  return noise;
}

Eigen::MatrixXd NoiseInjectBatch(const Eigen::MatrixXd& batch, int n_patches,
                                 int target, const Eigen::VectorXd& mask_row,
                                 double sigma, const Eigen::MatrixXd& noise) {
  const int d = PatchCount(batch, n_patches);
  CheckTarget(target, n_patches);
  if (mask_row.size() != n_patches) {
    throw InvalidInputError("mask row length must equal n_patches");
  }
  if (noise.rows() != batch.rows() || noise.cols() != batch.cols()) {
    throw InvalidInputError("noise shape must match the batch");
  }
  Eigen::MatrixXd design(batch.rows(), Eigen::Index{n_patches - 1} * d);
  Eigen::Index block = 0;
  for (int i = 0; i < n_patches; ++i) {
    if (i == target) continue;
    const double alpha = Alpha(mask_row(i), sigma);
    const auto cols = Eigen::seqN(Eigen::Index{i} * d, d);
    design.middleCols(block * d, d) =
        alpha * batch(Eigen::all, cols) + (1.0 - alpha) * noise(Eigen::all, cols);
    ++block;
  }
  return design;
}

Eigen::MatrixXd NoiseInject(const PatchField& field, int target,
                            const Eigen::VectorXd& mask_row, double sigma,
                            std::uint64_t noise_seed) {
  const int n = static_cast<int>(field.embeddings.rows());
  const int d = static_cast<int>(field.embeddings.cols());
  if (mask_row.size() != n) {
    throw InvalidInputError("mask row length must equal n_patches");
  }
  if (mask_row(target) != 0.0) {
    throw InvalidInputError("mask entry at the target must be 0");
  }
  const Eigen::MatrixXd flat = field.Flat().transpose();
  const Eigen::MatrixXd design = NoiseInjectBatch(
      flat, n, target, mask_row, sigma, InjectionNoise(1, n * d, noise_seed));
  Eigen::MatrixXd out(n - 1, d);
  for (int k = 0; k < n - 1; ++k) {
    out.row(k) = design.block(0, Eigen::Index{k} * d, 1, d);
  }
  return out;
}

Eigen::VectorXd Reconstruct(const LinearDecoder& decoder,
                            const Eigen::MatrixXd& masked_embeddings) {
  const Eigen::Index d = decoder.bias.size();
  if (masked_embeddings.cols() != d ||
      masked_embeddings.size() != decoder.weights.cols()) {
    throw InvalidInputError("masked embeddings do not match decoder shape");
  }
  Eigen::VectorXd flat(masked_embeddings.size());
  for (Eigen::Index k = 0; k < masked_embeddings.rows(); ++k) {
    flat.segment(k * d, d) = masked_embeddings.row(k).transpose();
  }
  return decoder.weights * flat + decoder.bias;
}

double ReconstructionLoss(const Eigen::VectorXd& target_value,
                          const Eigen::VectorXd& prediction) {
  if (target_value.size() != prediction.size()) {
    throw InvalidInputError("reconstruction length mismatch");
  }
  return (target_value - prediction).cwiseAbs().sum();
}

namespace {

struct CosineTable {
  Eigen::MatrixXd similarity;
  Eigen::VectorXd norms;
};

CosineTable Cosines(const Eigen::MatrixXd& weights) {
  CosineTable table;
  table.norms = weights.rowwise().norm();
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    if (!(table.norms(i) > 0.0)) {
      throw InvalidInputError("degenerate mask: row " + std::to_string(i) +
                              " is all zero");
    }
  }
  const Eigen::MatrixXd unit = table.norms.cwiseInverse().asDiagonal() * weights;
  table.similarity = unit * unit.transpose();
  table.similarity.diagonal().setOnes();
  return table;
}

// Row-wise softmax of similarity / tau.
Eigen::MatrixXd SoftmaxRows(const Eigen::MatrixXd& similarity, double tau) {
  Eigen::MatrixXd logits = similarity / tau;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

double ContrastiveLoss(const Eigen::MatrixXd& weights, double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be > 0");
  const auto table = Cosines(weights);
  const Eigen::Index n = weights.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd scaled = table.similarity.row(i) / tau;
    const double top = scaled.maxCoeff();
    const double log_sum = top + std::log((scaled.array() - top).exp().sum());
    total += log_sum - scaled(i);
  }
  return total / static_cast<double>(n);
}

Eigen::MatrixXd ContrastiveGradient(const Eigen::MatrixXd& weights,
                                    double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be > 0");
  const auto table = Cosines(weights);
  const Eigen::Index n = weights.rows();
  const Eigen::MatrixXd prob = SoftmaxRows(table.similarity, tau);
  // d loss / d s_ij for i != j; s_ii is constant.
  Eigen::MatrixXd upstream = prob / (static_cast<double>(n) * tau);
  upstream.diagonal().setZero();
  const Eigen::MatrixXd coupled = upstream + upstream.transpose();

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ni = table.norms(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || coupled(i, j) == 0.0) continue;
      const double nj = table.norms(j);
      grad.row(i) += coupled(i, j) *
                     (weights.row(j) / (ni * nj) -
                      table.similarity(i, j) * weights.row(i) / (ni * ni));
    }
  }
  grad.diagonal().setZero();
  return grad;
}

double MaskEntropy(std::span<const Eigen::MatrixXd> masks) {
  if (masks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& mask : masks) {
    total += mask
                 .unaryExpr([](double w) {
                   return w > 0.0 ? -w * std::log(w) : 0.0;
                 })
                 .sum();
  }
  return total / static_cast<double>(masks.size());
}

double MaskEntropy(const Eigen::MatrixXd& mask) {
  return MaskEntropy(std::span<const Eigen::MatrixXd>(&mask, 1));
}

LinearDecoder FitDecoder(const Eigen::MatrixXd& batch, int n_patches,
                         int target, const SelectionMaskSet& masks,
                         std::uint64_t noise_seed, double ridge_lambda) {
  const int d = PatchCount(batch, n_patches);
  CheckTarget(target, n_patches);
  if (masks.size() != n_patches) {
    throw InvalidInputError("mask set size does not match n_patches");
  }
  if (!(ridge_lambda >= 0.0)) throw InvalidInputError("ridge_lambda must be >= 0");
  const Eigen::Index features = Eigen::Index{n_patches - 1} * d;
  if (batch.rows() < features + 1) {
    throw InvalidInputError("decoder fit needs at least (N-1)d + 1 = " +
                            std::to_string(features + 1) + " fields, got " +
                            std::to_string(batch.rows()));
  }
  const Eigen::MatrixXd noise =
      InjectionNoise(static_cast<int>(batch.rows()),
                     static_cast<int>(batch.cols()), noise_seed);
  const Eigen::MatrixXd design =
      NoiseInjectBatch(batch, n_patches, target,
                       masks.weights().row(target).transpose(), masks.sigma(),
                       noise);
  const Eigen::MatrixXd response = TargetBlock(batch, target, d);

  const Eigen::RowVectorXd design_mean = design.colwise().mean();
  const Eigen::RowVectorXd response_mean = response.colwise().mean();
  const Eigen::MatrixXd centered = design.rowwise() - design_mean;
  Eigen::MatrixXd gram = centered.transpose() * centered;
  gram.diagonal().array() += ridge_lambda;
  if (ridge_lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < features) {
      throw NumericalError("rank-deficient decoder design (rank " +
                           std::to_string(lu.rank()) + " < " +
                           std::to_string(features) + ") with ridge_lambda = 0");
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("decoder normal equations could not be factored");
  }
  const Eigen::MatrixXd coef =
      ldlt.solve(centered.transpose() * (response.rowwise() - response_mean));

  LinearDecoder decoder;
  decoder.target = target;
  decoder.weights = coef.transpose();
  decoder.bias = (response_mean - design_mean * coef).transpose();
  decoder.ridge_lambda = ridge_lambda;
  if (!decoder.weights.allFinite() || !decoder.bias.allFinite()) {
    throw NumericalError("decoder fit produced non-finite coefficients");
  }
  return decoder;
}

double EncoderObjective(const Eigen::MatrixXd& batch, int target,
                        const SelectionMaskSet& masks,
                        const LinearDecoder& decoder, double lambda_c,
                        double tau, std::uint64_t noise_seed) {
  const int n = masks.size();
  CheckTarget(target, n);
  const Eigen::MatrixXd noise =
      InjectionNoise(static_cast<int>(batch.rows()),
                     static_cast<int>(batch.cols()), noise_seed);
  const auto term =
      EvaluateReconstruction(batch, n, target,
                             masks.weights().row(target).transpose(),
                             masks.sigma(), decoder, noise);
  double objective = term.loss;
  if (lambda_c != 0.0) objective += lambda_c * ContrastiveLoss(masks.weights(), tau);
  return objective;
}

Eigen::VectorXd EncoderGradient(const Eigen::MatrixXd& batch, int target,
                                const SelectionMaskSet& masks,
                                const LinearDecoder& decoder, double lambda_c,
                                double tau, std::uint64_t noise_seed) {
  const int n = masks.size();
  CheckTarget(target, n);
  const Eigen::MatrixXd noise =
      InjectionNoise(static_cast<int>(batch.rows()),
                     static_cast<int>(batch.cols()), noise_seed);
  const Eigen::VectorXd row = masks.weights().row(target).transpose();
  auto term = EvaluateReconstruction(batch, n, target, row, masks.sigma(),
                                     decoder, noise);
  Eigen::VectorXd grad_w = term.grad_weights;
  if (lambda_c != 0.0) {
    grad_w += lambda_c *
              ContrastiveGradient(masks.weights(), tau).row(target).transpose();
  }
  Eigen::VectorXd grad = grad_w.cwiseProduct(
      row.unaryExpr([](double w) { return w * (1.0 - w); }));
  grad(target) = 0.0;
  CheckFinite(grad, target);
  return grad;
}

double MinAbsResidual(const Eigen::MatrixXd& batch, int target,
                      const SelectionMaskSet& masks,
                      const LinearDecoder& decoder, std::uint64_t noise_seed) {
  const Eigen::MatrixXd noise =
      InjectionNoise(static_cast<int>(batch.rows()),
                     static_cast<int>(batch.cols()), noise_seed);
  return EvaluateReconstruction(batch, masks.size(), target,
                                masks.weights().row(target).transpose(),
                                masks.sigma(), decoder, noise)
      .min_abs_residual;
}

SelectionMaskSet EncoderStep(const Eigen::MatrixXd& batch, int target,
                             const SelectionMaskSet& masks,
                             const LinearDecoder& decoder,
                             const EncoderStepOptions& options,
                             std::uint64_t noise_seed) {
  const Eigen::VectorXd grad = EncoderGradient(
      batch, target, masks, decoder, options.lambda_c, options.tau, noise_seed);
  SelectionMaskSet updated = masks;
  if (options.lr == 0.0) return updated;
  const Eigen::VectorXd logits =
      masks.logits().row(target).transpose() - options.lr * grad;
  updated.SetLogitsRow(target, logits);
  return updated;
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw InvalidInputError("epochs must be >= 1");
  if (steps_per_epoch < 1) throw InvalidInputError("steps_per_epoch must be >= 1");
  if (batch_size < 2) throw InvalidInputError("batch_size must be >= 2");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInputError("lr must be >= 0");
  if (!(sigma > 0.0)) throw InvalidInputError("sigma must be > 0");
  if (!(lambda_c >= 0.0)) throw InvalidInputError("lambda_c must be >= 0");
  if (!(tau > 0.0)) throw InvalidInputError("tau must be > 0");
  if (!(ridge_lambda >= 0.0)) throw InvalidInputError("ridge_lambda must be >= 0");
}

TrainResult Train(const GaussianModel& model, const TrainConfig& config) {
  config.Validate();
  const int n = model.n_patches();
  if (n < 2) throw InvalidInputError("mask learning needs N >= 2");
  const std::uint64_t seed = config.master_seed;

  TrainResult result;
  result.masks = SelectionMaskSet::Uniform(n, config.sigma);
  result.initial_mask_entropy = MaskEntropy(result.masks.weights());
  result.decoders.resize(static_cast<std::size_t>(n));

  const auto start = std::chrono::steady_clock::now();
  std::uint64_t global_step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < config.steps_per_epoch; ++step, ++global_step) {
      const Eigen::MatrixXd fit_batch = SampleBatch(
          model, config.batch_size, DeriveSeed(seed, "fit-batch", global_step));
      const Eigen::MatrixXd step_batch = SampleBatch(
          model, config.batch_size, DeriveSeed(seed, "step-batch", global_step));
      const std::uint64_t fit_noise = DeriveSeed(seed, "fit-noise", global_step);
      const Eigen::MatrixXd step_noise =
          InjectionNoise(config.batch_size, model.dimension(),
                         DeriveSeed(seed, "step-noise", global_step));

      // Per-target phase: targets share no mutable state.
      Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(n, n);
      double step_loss = 0.0;
      for (int target = 0; target < n; ++target) {
        auto& decoder = result.decoders[static_cast<std::size_t>(target)];
        decoder = FitDecoder(fit_batch, n, target, result.masks, fit_noise,
                             config.ridge_lambda);
        const auto term = EvaluateReconstruction(
            step_batch, n, target,
            result.masks.weights().row(target).transpose(), config.sigma,
            decoder, step_noise);
        step_loss += term.loss;
        grad_w.row(target) = term.grad_weights.transpose();
      }
      step_loss /= static_cast<double>(n);
      if (global_step == 0) result.initial_recon_loss = step_loss;
      if (!std::isfinite(step_loss) ||
          step_loss > kDivergenceFactor * result.initial_recon_loss) {
        throw NumericalError("training diverged at epoch " +
                             std::to_string(epoch) + ": reconstruction loss " +
                             std::to_string(step_loss) + " vs initial " +
                             std::to_string(result.initial_recon_loss));
      }
      epoch_loss += step_loss;

      // Synchronized phase: the contrastive term couples all rows.
      if (config.lambda_c != 0.0) {
        grad_w += config.lambda_c *
                  ContrastiveGradient(result.masks.weights(), config.tau);
      }
      const Eigen::MatrixXd& w = result.masks.weights();
      const Eigen::MatrixXd grad_logits =
          grad_w.cwiseProduct(w.unaryExpr([](double x) { return x * (1.0 - x); }));
      if (!grad_logits.allFinite()) {
        throw NumericalError("non-finite encoder gradient at epoch " +
                             std::to_string(epoch));
      }
      Eigen::MatrixXd logits = result.masks.logits() - config.lr * grad_logits;
      result.masks = SelectionMaskSet::FromLogits(std::move(logits), config.sigma);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.recon_loss = epoch_loss / static_cast<double>(config.steps_per_epoch);
    record.contrastive_loss = ContrastiveLoss(result.masks.weights(), config.tau);
    record.mask_entropy = MaskEntropy(result.masks.weights());
    if (config.record_wall_clock) {
      record.seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    }
    result.report.push_back(record);
  }
  return result;
}

double ConstantPredictorLoss(const GaussianModel& model) {
  const Eigen::VectorXd sd = model.covariance().diagonal().cwiseSqrt();
  return std::sqrt(2.0 / std::numbers::pi) * sd.sum() /
         static_cast<double>(model.n_patches());
}

std::string MasksToCsv(const SelectionMaskSet& masks) {
  return MatrixToCsv(masks.weights());
}

SelectionMaskSet MasksFromCsv(const std::string& text, double sigma) {
  const Eigen::MatrixXd weights = MatrixFromCsv(text);
  if (weights.rows() != weights.cols()) {
    throw InvalidInputError("mask CSV must be square");
  }
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    if (weights(i, i) != 0.0) {
      throw InvalidInputError("mask CSV diagonal entry " + std::to_string(i) +
                              " is not 0");
    }
  }
  return SelectionMaskSet::FromWeights(weights, sigma);
}

std::string MasksToJson(const SelectionMaskSet& masks) {
  auto rows = [](const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = m(r, c);
      }
      out.push_back(row);
    }
    return out;
  };
  Json j;
  j["n_patches"] = masks.size();
  j["sigma"] = masks.sigma();
  j["weights"] = rows(masks.weights());
  j["logits"] = rows(masks.logits());
  return j.dump(2) + "\n";
}

SelectionMaskSet MasksFromJson(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    const auto logits = j.at("logits").get<std::vector<std::vector<double>>>();
    const int n = j.at("n_patches").get<int>();
    if (static_cast<int>(logits.size()) != n) {
      throw InvalidInputError("mask JSON logits have wrong row count");
    }
    Eigen::MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(logits[static_cast<std::size_t>(r)].size()) != n) {
        throw InvalidInputError("mask JSON logits are not square");
      }
      for (int c = 0; c < n; ++c) {
        m(r, c) = logits[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
    }
    return SelectionMaskSet::FromLogits(std::move(m), j.at("sigma").get<double>());
  } catch (const Json::exception& e) {
    throw InvalidInputError(std::string("malformed mask JSON: ") + e.what());
  }
}

std::string TrainReportToCsv(std::span<const EpochRecord> report) {
  CsvTable table;
  table.header = {"epoch", "recon_loss", "contrastive_loss", "mask_entropy",
                  "seconds"};
  for (const auto& r : report) {
    table.rows.push_back({std::to_string(r.epoch), FormatReal(r.recon_loss),
                          FormatReal(r.contrastive_loss),
                          FormatReal(r.mask_entropy), FormatReal(r.seconds)});
  }
  return table.ToString();
}

}  // namespace collapse
