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

#ifndef COLLAPSE_MASK_LEARNER_H_
#define COLLAPSE_MASK_LEARNER_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "collapse/gaussian_field.h"

namespace collapse {

// Soft selection masks, one row per target patch. Row n weights how much of
// every other patch survives noise injection when patch n is reconstructed.
//
// Entries are logistic(theta) so they stay in [0, 1] under any update; the
// diagonal is pinned to 0 and its logit is ignored.
class SelectionMaskSet {
 public:
  SelectionMaskSet() = default;

  // All off-diagonal entries 0.5 (theta = 0).
  static SelectionMaskSet Uniform(int n_patches, double sigma);
  static SelectionMaskSet FromLogits(Eigen::MatrixXd logits, double sigma);
  // Entries must already lie in [0, 1]; the diagonal is forced to 0. Logits
  // are recovered by clamped logit so that further training is possible.
  static SelectionMaskSet FromWeights(Eigen::MatrixXd weights, double sigma);

  int size() const { return static_cast<int>(weights_.rows()); }
  double sigma() const { return sigma_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::MatrixXd& logits() const { return logits_; }

  // Replaces the logits of one target row and refreshes its weights.
  void SetLogitsRow(int target, const Eigen::VectorXd& logits);

 private:
  SelectionMaskSet(Eigen::MatrixXd logits, Eigen::MatrixXd weights,
                   double sigma);

  Eigen::MatrixXd logits_;
  Eigen::MatrixXd weights_;
  double sigma_ = 0.5;
};

// Affine decoder for one target patch: prediction = weights * z + bias with z
// the flattened noise-injected embeddings of the other N-1 patches.
struct LinearDecoder {
  int target = 0;
  Eigen::MatrixXd weights;  // d x (N-1)d
  Eigen::VectorXd bias;     // d
  double ridge_lambda = 1e-3;
};

// Exponential decay interpolant exp(-(1 - w)^2 / (2 sigma^2)).
double Alpha(double w, double sigma);

// B x (N*d) standard normal draws used as injection noise.
Eigen::MatrixXd InjectionNoise(int batch_size, int dimension,
                               std::uint64_t noise_seed);

// Masks every non-target patch as alpha_i * e_i + (1 - alpha_i) * eps_i.
// Returns an (N-1) x d matrix of the surviving patches in ascending index
// order. The noise equals row 0 of InjectionNoise(1, N*d, noise_seed).
Eigen::MatrixXd NoiseInject(const PatchField& field, int target,
                            const Eigen::VectorXd& mask_row, double sigma,
                            std::uint64_t noise_seed);

// Batched form over a B x (N*d) matrix of flattened fields with explicit
// noise of the same shape; returns the B x (N-1)d design matrix.
Eigen::MatrixXd NoiseInjectBatch(const Eigen::MatrixXd& batch, int n_patches,
                                 int target, const Eigen::VectorXd& mask_row,
                                 double sigma, const Eigen::MatrixXd& noise);

Eigen::VectorXd Reconstruct(const LinearDecoder& decoder,
                            const Eigen::MatrixXd& masked_embeddings);

// L1 distance between a patch and its reconstruction.
double ReconstructionLoss(const Eigen::VectorXd& target_value,
                          const Eigen::VectorXd& prediction);

// Mean over rows of the InfoNCE-style diversity loss on cosine similarities
// of mask rows; the positive pair of row i is row i itself.
double ContrastiveLoss(const Eigen::MatrixXd& weights, double tau);

// d ContrastiveLoss / d weights. Diagonal entries are reported as 0.
Eigen::MatrixXd ContrastiveGradient(const Eigen::MatrixXd& weights, double tau);

// -(1/M) sum_i sum_jk w log w with 0 log 0 = 0.
double MaskEntropy(std::span<const Eigen::MatrixXd> masks);
double MaskEntropy(const Eigen::MatrixXd& mask);

// Ridge regression of the target patch on its noise-injected neighbours,
// with an unpenalized intercept. `batch` is B x (N*d).
LinearDecoder FitDecoder(const Eigen::MatrixXd& batch, int n_patches,
                         int target, const SelectionMaskSet& masks,
                         std::uint64_t noise_seed, double ridge_lambda);

struct EncoderStepOptions {
  double lr = 1.0;
  double lambda_c = 0.01;
  double tau = 1.0;
};

// Per-target encoder objective L1(target) + lambda_c * contrastive, as a
// function of the target row's logits, with injection noise fixed by
// `noise_seed`.
double EncoderObjective(const Eigen::MatrixXd& batch, int target,
                        const SelectionMaskSet& masks,
                        const LinearDecoder& decoder, double lambda_c,
                        double tau, std::uint64_t noise_seed);

// Analytic gradient of EncoderObjective with respect to the target row's
// logits (length N, target entry 0). The L1 subgradient is 0 at ties.
Eigen::VectorXd EncoderGradient(const Eigen::MatrixXd& batch, int target,
                                const SelectionMaskSet& masks,
                                const LinearDecoder& decoder, double lambda_c,
                                double tau, std::uint64_t noise_seed);

// Smallest |residual| of the decoder on the noise-injected batch; distance to
// the nearest L1 kink.
double MinAbsResidual(const Eigen::MatrixXd& batch, int target,
                      const SelectionMaskSet& masks,
                      const LinearDecoder& decoder, std::uint64_t noise_seed);

// One gradient step on the target row's logits. Throws NumericalError on a
// non-finite gradient.
SelectionMaskSet EncoderStep(const Eigen::MatrixXd& batch, int target,
                             const SelectionMaskSet& masks,
                             const LinearDecoder& decoder,
                             const EncoderStepOptions& options,
                             std::uint64_t noise_seed);

struct TrainConfig {
  int epochs = 60;
  int steps_per_epoch = 10;
  int batch_size = 256;
  double lr = 4.0;
  double sigma = 0.5;
  double lambda_c = 0.01;
  double tau = 1.0;
  double ridge_lambda = 1e-3;
  std::uint64_t master_seed = 0;
  // When false the `seconds` column is written as 0 so that reports are
  // byte-reproducible.
  bool record_wall_clock = false;

  // Throws InvalidInputError naming the first offending field.
  void Validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double recon_loss = 0.0;
  double contrastive_loss = 0.0;
  double mask_entropy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  SelectionMaskSet masks;
  std::vector<LinearDecoder> decoders;
  std::vector<EpochRecord> report;
  double initial_mask_entropy = 0.0;
  double initial_recon_loss = 0.0;
};

// Alternates per-target ridge refits (on a fit batch) with encoder gradient
// steps (on an independent step batch) for every target, then applies the
// synchronized contrastive gradient. Throws NumericalError when the
// reconstruction loss exceeds 1e3 times its initial value.
TrainResult Train(const GaussianModel& model, const TrainConfig& config);

// Mean over targets of the L1 loss of the best constant (per-coordinate
// median) predictor, sqrt(2/pi) * sum_k sd_k.
double ConstantPredictorLoss(const GaussianModel& model);

std::string MasksToCsv(const SelectionMaskSet& masks);
SelectionMaskSet MasksFromCsv(const std::string& text, double sigma);
std::string MasksToJson(const SelectionMaskSet& masks);
SelectionMaskSet MasksFromJson(std::string_view text);

// Columns: epoch, recon_loss, contrastive_loss, mask_entropy, seconds.
std::string TrainReportToCsv(std::span<const EpochRecord> report);

}  // namespace collapse

#endif  // COLLAPSE_MASK_LEARNER_H_
