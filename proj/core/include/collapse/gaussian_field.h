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

#ifndef COLLAPSE_GAUSSIAN_FIELD_H_
#define COLLAPSE_GAUSSIAN_FIELD_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace collapse {

enum class StructureKind { kIndependent, kChain, kStar, kBlock };

std::string_view StructureKindName(StructureKind kind);
StructureKind ParseStructureKind(std::string_view name);

// Planted dependency structure of a synthetic patch field.
//
// Edges carry the off-diagonal precision blocks -coupling * Q, where Q is the
// identity for one-dimensional patches and a seeded random rotation otherwise.
struct StructureSpec {
  StructureKind kind = StructureKind::kIndependent;
  double coupling = 0.0;
  // Hub patch of a star.
  int center = 0;
  // Partition of the patch indices for kBlock. Empty means contiguous groups
  // of `block_size`.
  std::vector<std::vector<int>> blocks;
  int block_size = 4;
};

// Patch pairs (i < j) joined by a nonzero precision block.
std::vector<std::pair<int, int>> StructureEdges(const StructureSpec& spec,
                                                int n_patches);

// Gaussian distribution over N patches of dimension d, parameterized by its
// precision matrix. Immutable; copies share the cached factorizations.
class GaussianModel {
 public:
  GaussianModel(StructureSpec spec, int n_patches, int patch_dim,
                Eigen::VectorXd mean, Eigen::MatrixXd precision);

  int n_patches() const { return n_patches_; }
  int patch_dim() const { return patch_dim_; }
  int dimension() const { return n_patches_ * patch_dim_; }
  const StructureSpec& spec() const { return spec_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& precision() const { return cache_->precision; }
  const Eigen::MatrixXd& covariance() const { return cache_->covariance; }
  // Lower Cholesky factor L of the covariance, L * L^T = covariance.
  const Eigen::MatrixXd& covariance_factor() const { return cache_->factor; }
  double min_precision_eigenvalue() const { return cache_->min_eigenvalue; }

  // Content hash of (N, d, mean, precision) as 16 hex digits.
  const std::string& id() const { return cache_->id; }

  // Copy of this model with a different mean vector.
  GaussianModel WithMean(Eigen::VectorXd mean) const;

  // Coordinates [patch * d, (patch + 1) * d) of the flat vector.
  Eigen::Index Offset(int patch) const { return Eigen::Index{patch} * patch_dim_; }

 private:
  struct Cache {
    Eigen::MatrixXd precision;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd factor;
    double min_eigenvalue = 0.0;
    std::string id;
  };

  GaussianModel(StructureSpec spec, int n_patches, int patch_dim,
                Eigen::VectorXd mean, std::shared_ptr<const Cache> cache);

  StructureSpec spec_;
  int n_patches_;
  int patch_dim_;
  Eigen::VectorXd mean_;
  std::shared_ptr<const Cache> cache_;
};

// One draw of all N patch embeddings, stored as an N x d matrix.
struct PatchField {
  Eigen::MatrixXd embeddings;
  std::string model_id;
  std::uint64_t seed = 0;

  // Row-major flattening, patch after patch.
  Eigen::VectorXd Flat() const;
};

// Builds a zero-mean model with unit diagonal precision blocks and the
// spec's edges. Throws NumericalError naming the smallest eigenvalue when the
// coupling destroys positive-definiteness.
GaussianModel BuildModel(const StructureSpec& spec, int n_patches,
                         int patch_dim, std::uint64_t seed);

PatchField Sample(const GaussianModel& model, std::uint64_t seed);

// B x (N*d) matrix of independent draws, row b seeded by DeriveSeed(seed, b).
// Row b equals Sample(model, DeriveSeed(seed, "field", b)).Flat().
Eigen::MatrixXd SampleBatch(const GaussianModel& model, int batch_size,
                            std::uint64_t seed);

// Differential entropy (nats) of patch `target` given the patches in
// `observed`: 0.5 * ln((2 pi e)^d det Sigma_{target|observed}).
double ConditionalEntropy(const GaussianModel& model, int target,
                          std::span<const int> observed);

// Entropy of every patch given `observed` in one factorization. Observed
// patches are realized and contribute 0.
std::vector<double> ConditionalEntropies(const GaussianModel& model,
                                         std::span<const int> observed);

// 0.5 * ln((2 pi e)^{Nd} det Sigma).
double JointEntropy(const GaussianModel& model);

// E[e_target | e_observed = field values].
Eigen::VectorXd ConditionalMean(const GaussianModel& model,
                                const PatchField& field, int target,
                                std::span<const int> observed);

// Regression form of the conditional mean: E[e_t | x_S] = offset + gain * x_S,
// with x_S the concatenated observed patches in the order given.
struct LinearPredictor {
  Eigen::MatrixXd gain;
  Eigen::VectorXd offset;
};
LinearPredictor ConditionalPredictor(const GaussianModel& model, int target,
                                     std::span<const int> observed);

std::string ModelToJson(const GaussianModel& model);
GaussianModel ModelFromJson(std::string_view text);
std::string FieldsToJson(std::span<const PatchField> fields);
std::vector<PatchField> FieldsFromJson(std::string_view text);

}  // namespace collapse

#endif  // COLLAPSE_GAUSSIAN_FIELD_H_
