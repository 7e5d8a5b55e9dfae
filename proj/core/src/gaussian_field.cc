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

#include "collapse/gaussian_field.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "collapse/errors.h"
#include "collapse/seeding.h"
#include "json.hpp"

namespace collapse {
namespace {

using Json = nlohmann::json;

constexpr double kSymmetryTolerance = 1e-10;

// ln((2 pi e)^d)
double GaussianEntropyConstant(Eigen::Index dim) {
  return static_cast<double>(dim) *
         std::log(2.0 * std::numbers::pi * std::numbers::e);
}

double LogDetSpd(const Eigen::MatrixXd& matrix, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("singular ") + what);
  }
  const auto& factor = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    const double pivot = factor(i, i);
    if (!(pivot > 0.0)) throw NumericalError(std::string("singular ") + what);
    log_det += 2.0 * std::log(pivot);
  }
  return log_det;
}

void CheckPatch(const GaussianModel& model, int patch, const char* role) {
  if (patch < 0 || patch >= model.n_patches()) {
    throw InvalidInputError(std::string(role) + " patch " +
                            std::to_string(patch) + " out of range [0, " +
                            std::to_string(model.n_patches()) + ")");
  }
}

// Validates `observed` and returns it with `target` checked against it.
std::vector<int> CheckObserved(const GaussianModel& model, int target,
                               std::span<const int> observed) {
  std::vector<int> sorted(observed.begin(), observed.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    CheckPatch(model, sorted[i], "observed");
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw InvalidInputError("observed set repeats patch " +
                              std::to_string(sorted[i]));
    }
  }
  if (target >= 0 && std::binary_search(sorted.begin(), sorted.end(), target)) {
    throw InvalidInputError("target patch " + std::to_string(target) +
                            " is in the observed set");
  }
  return sorted;
}

// Flat coordinate indices of a list of patches, in list order.
std::vector<Eigen::Index> Coordinates(const GaussianModel& model,
                                      std::span<const int> patches) {
  std::vector<Eigen::Index> coords;
  coords.reserve(patches.size() * static_cast<std::size_t>(model.patch_dim()));
  for (int p : patches) {
    for (int k = 0; k < model.patch_dim(); ++k) {
      coords.push_back(model.Offset(p) + k);
    }
  }
  return coords;
}

Eigen::MatrixXd Submatrix(const Eigen::MatrixXd& m,
                          const std::vector<Eigen::Index>& rows,
                          const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(rows[r], cols[c]);
    }
  }
  return out;
}

Eigen::VectorXd Subvector(const Eigen::VectorXd& v,
                          const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  }
  return out;
}

// Haar-distributed rotation, sign-fixed so the result is deterministic.
Eigen::MatrixXd RandomRotation(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < dim; ++k) {
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  }
  return q;
}

std::string HexId(int n, int d, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& precision) {
  std::uint64_t hash = HashName("gaussian-model");
  auto absorb = [&hash](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  absorb(&n, sizeof(n));
  absorb(&d, sizeof(d));
  absorb(mean.data(), sizeof(double) * static_cast<std::size_t>(mean.size()));
  absorb(precision.data(),
         sizeof(double) * static_cast<std::size_t>(precision.size()));
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << hash;
  return out.str();
}

std::vector<std::vector<int>> ResolveBlocks(const StructureSpec& spec,
                                            int n_patches) {
  if (!spec.blocks.empty()) return spec.blocks;
  if (spec.block_size < 1) {
    throw InvalidInputError("block_size must be >= 1");
  }
  std::vector<std::vector<int>> blocks;
  for (int start = 0; start < n_patches; start += spec.block_size) {
    std::vector<int> block;
    for (int i = start; i < std::min(n_patches, start + spec.block_size); ++i) {
      block.push_back(i);
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

Json SpecToJson(const StructureSpec& spec) {
  Json j;
  j["kind"] = std::string(StructureKindName(spec.kind));
  j["coupling"] = spec.coupling;
  j["center"] = spec.center;
  j["blocks"] = spec.blocks;
  j["block_size"] = spec.block_size;
  return j;
}

StructureSpec SpecFromJson(const Json& j) {
  StructureSpec spec;
  spec.kind = ParseStructureKind(j.at("kind").get<std::string>());
  spec.coupling = j.at("coupling").get<double>();
  spec.center = j.value("center", 0);
  spec.blocks = j.value("blocks", std::vector<std::vector<int>>{});
  spec.block_size = j.value("block_size", 4);
  return spec;
}

}  // namespace

std::string_view StructureKindName(StructureKind kind) {
  switch (kind) {
    case StructureKind::kIndependent:
      return "independent";
    case StructureKind::kChain:
      return "chain";
    case StructureKind::kStar:
      return "star";
    case StructureKind::kBlock:
      return "block";
  }
  return "unknown";
}

StructureKind ParseStructureKind(std::string_view name) {
  if (name == "independent") return StructureKind::kIndependent;
  if (name == "chain") return StructureKind::kChain;
  if (name == "star") return StructureKind::kStar;
  if (name == "block") return StructureKind::kBlock;
  throw InvalidInputError("unknown structure kind '" + std::string(name) +
                          "'");
}

std::vector<std::pair<int, int>> StructureEdges(const StructureSpec& spec,
                                                int n_patches) {
  std::vector<std::pair<int, int>> edges;
  switch (spec.kind) {
    case StructureKind::kIndependent:
      break;
    case StructureKind::kChain:
      for (int i = 0; i + 1 < n_patches; ++i) edges.emplace_back(i, i + 1);
      break;
    case StructureKind::kStar:
      if (n_patches < 2) throw InvalidInputError("star requires N >= 2");
      if (spec.center < 0 || spec.center >= n_patches) {
        throw InvalidInputError("star center out of range");
      }
      for (int i = 0; i < n_patches; ++i) {
        if (i != spec.center) {
          edges.emplace_back(std::min(i, spec.center),
                             std::max(i, spec.center));
        }
      }
      break;
    case StructureKind::kBlock: {
      const auto blocks = ResolveBlocks(spec, n_patches);
      std::vector<int> seen(static_cast<std::size_t>(n_patches), 0);
      for (const auto& block : blocks) {
        for (int p : block) {
          if (p < 0 || p >= n_patches) {
            throw InvalidInputError("block index " + std::to_string(p) +
                                    " out of range");
          }
          ++seen[static_cast<std::size_t>(p)];
        }
      }
      for (int p = 0; p < n_patches; ++p) {
        if (seen[static_cast<std::size_t>(p)] != 1) {
          throw InvalidInputError(
              "blocks must cover every patch exactly once (patch " +
              std::to_string(p) + " appears " +
              std::to_string(seen[static_cast<std::size_t>(p)]) + " times)");
        }
      }
      for (const auto& block : blocks) {
        for (std::size_t a = 0; a < block.size(); ++a) {
          for (std::size_t b = a + 1; b < block.size(); ++b) {
            edges.emplace_back(std::min(block[a], block[b]),
                               std::max(block[a], block[b]));
          }
        }
      }
      std::sort(edges.begin(), edges.end());
      break;
    }
  }
  return edges;
}

GaussianModel::GaussianModel(StructureSpec spec, int n_patches, int patch_dim,
                             Eigen::VectorXd mean, Eigen::MatrixXd precision)
    : spec_(std::move(spec)),
      n_patches_(n_patches),
      patch_dim_(patch_dim),
      mean_(std::move(mean)) {
  if (n_patches < 1 || patch_dim < 1) {
    throw InvalidInputError("n_patches and patch_dim must be >= 1");
  }
  const Eigen::Index dim = Eigen::Index{n_patches} * patch_dim;
  if (mean_.size() != dim) {
    throw InvalidInputError("mean has length " + std::to_string(mean_.size()) +
                            ", expected " + std::to_string(dim));
  }
  if (precision.rows() != dim || precision.cols() != dim) {
    throw InvalidInputError("precision must be " + std::to_string(dim) + "x" +
                            std::to_string(dim));
  }
  if (!precision.allFinite() || !mean_.allFinite()) {
    throw InvalidInputError("model parameters must be finite");
  }
  const double asymmetry = (precision - precision.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > kSymmetryTolerance) {
    throw InvalidInputError("precision is not symmetric (max |P - P^T| = " +
                            std::to_string(asymmetry) + ")");
  }
  auto cache = std::make_shared<Cache>();
  cache->precision = 0.5 * (precision + precision.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cache->precision,
                                                     Eigen::EigenvaluesOnly);
  cache->min_eigenvalue = eig.eigenvalues().minCoeff();
  if (!(cache->min_eigenvalue > 0.0)) {
    throw NumericalError(
        "precision is not positive-definite (smallest eigenvalue " +
        std::to_string(cache->min_eigenvalue) + ")");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cache->precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization of precision failed");
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
  cache->covariance = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> cov_llt(cache->covariance);
  if (cov_llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky factorization of covariance failed");
  }
  cache->factor = cov_llt.matrixL();
  cache->id = HexId(n_patches, patch_dim, mean_, cache->precision);
  cache_ = std::move(cache);
}

GaussianModel::GaussianModel(StructureSpec spec, int n_patches, int patch_dim,
                             Eigen::VectorXd mean,
                             std::shared_ptr<const Cache> cache)
    : spec_(std::move(spec)),
      n_patches_(n_patches),
      patch_dim_(patch_dim),
      mean_(std::move(mean)),
      cache_(std::move(cache)) {}

GaussianModel GaussianModel::WithMean(Eigen::VectorXd mean) const {
  if (mean.size() != dimension() || !mean.allFinite()) {
    throw InvalidInputError("replacement mean has wrong length or is not finite");
  }
  auto cache = std::make_shared<Cache>(*cache_);
  cache->id = HexId(n_patches_, patch_dim_, mean, cache->precision);
  return GaussianModel(spec_, n_patches_, patch_dim_, std::move(mean),
                       std::move(cache));
}

Eigen::VectorXd PatchField::Flat() const {
  Eigen::VectorXd flat(embeddings.size());
  for (Eigen::Index n = 0; n < embeddings.rows(); ++n) {
    flat.segment(n * embeddings.cols(), embeddings.cols()) =
        embeddings.row(n).transpose();
  }
  return flat;
}

GaussianModel BuildModel(const StructureSpec& spec, int n_patches,
                         int patch_dim, std::uint64_t seed) {
  if (n_patches < 1 || patch_dim < 1) {
    throw InvalidInputError("n_patches and patch_dim must be >= 1");
  }
  if (!(spec.coupling >= 0.0) || !std::isfinite(spec.coupling)) {
    throw InvalidInputError("coupling must be finite and >= 0");
  }
  const auto edges = StructureEdges(spec, n_patches);
  const Eigen::Index dim = Eigen::Index{n_patches} * patch_dim;
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(dim, dim);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    Eigen::MatrixXd block =
        patch_dim == 1 ? Eigen::MatrixXd::Identity(1, 1)
                       : RandomRotation(patch_dim, DeriveSeed(seed, "edge", e));
    block *= -spec.coupling;
    precision.block(Eigen::Index{i} * patch_dim, Eigen::Index{j} * patch_dim,
                    patch_dim, patch_dim) = block;
    precision.block(Eigen::Index{j} * patch_dim, Eigen::Index{i} * patch_dim,
                    patch_dim, patch_dim) = block.transpose();
  }
  StructureSpec resolved = spec;
  if (spec.kind == StructureKind::kBlock) {
    resolved.blocks = ResolveBlocks(spec, n_patches);
  }
  return GaussianModel(std::move(resolved), n_patches, patch_dim,
                       Eigen::VectorXd::Zero(dim), std::move(precision));
}

PatchField Sample(const GaussianModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(model.dimension());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd x = model.mean() + model.covariance_factor() * z;
  PatchField field;
  field.embeddings.resize(model.n_patches(), model.patch_dim());
  for (int n = 0; n < model.n_patches(); ++n) {
    field.embeddings.row(n) =
        x.segment(model.Offset(n), model.patch_dim()).transpose();
  }
  field.model_id = model.id();
  field.seed = seed;
  return field;
}

Eigen::MatrixXd SampleBatch(const GaussianModel& model, int batch_size,
                            std::uint64_t seed) {
  if (batch_size < 0) throw InvalidInputError("batch_size must be >= 0");
  Eigen::MatrixXd batch(batch_size, model.dimension());
  for (int b = 0; b < batch_size; ++b) {
    batch.row(b) =
        Sample(model, DeriveSeed(seed, "field", static_cast<std::uint64_t>(b)))
            .Flat()
            .transpose();
  }
  return batch;
}

double ConditionalEntropy(const GaussianModel& model, int target,
                          std::span<const int> observed) {
  CheckPatch(model, target, "target");
  const auto sorted = CheckObserved(model, target, observed);
  const int target_list[] = {target};
  const auto t = Coordinates(model, target_list);
  const auto s = Coordinates(model, sorted);
  const Eigen::MatrixXd& cov = model.covariance();
  Eigen::MatrixXd conditional = Submatrix(cov, t, t);
  if (!s.empty()) {
    const Eigen::MatrixXd cross = Submatrix(cov, s, t);
    Eigen::LLT<Eigen::MatrixXd> llt(Submatrix(cov, s, s));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("observed covariance block is singular");
    }
    conditional -= cross.transpose() * llt.solve(cross);
  }
  return 0.5 * (GaussianEntropyConstant(model.patch_dim()) +
                LogDetSpd(conditional, "conditional covariance"));
}

std::vector<double> ConditionalEntropies(const GaussianModel& model,
                                         std::span<const int> observed) {
  const auto sorted = CheckObserved(model, -1, observed);
  std::vector<int> unobserved;
  for (int n = 0; n < model.n_patches(); ++n) {
    if (!std::binary_search(sorted.begin(), sorted.end(), n)) {
      unobserved.push_back(n);
    }
  }
  std::vector<double> entropies(static_cast<std::size_t>(model.n_patches()), 0.0);
  if (unobserved.empty()) return entropies;
  const auto u = Coordinates(model, unobserved);
  const auto s = Coordinates(model, sorted);
  const Eigen::MatrixXd& cov = model.covariance();
  Eigen::MatrixXd conditional = Submatrix(cov, u, u);
  if (!s.empty()) {
    const Eigen::MatrixXd cross = Submatrix(cov, s, u);
    Eigen::LLT<Eigen::MatrixXd> llt(Submatrix(cov, s, s));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("observed covariance block is singular");
    }
    conditional -= cross.transpose() * llt.solve(cross);
  }
  const int d = model.patch_dim();
  const double constant = GaussianEntropyConstant(d);
  for (std::size_t k = 0; k < unobserved.size(); ++k) {
    const Eigen::Index offset = static_cast<Eigen::Index>(k) * d;
    entropies[static_cast<std::size_t>(unobserved[k])] =
        0.5 * (constant + LogDetSpd(conditional.block(offset, offset, d, d),
                                    "conditional covariance"));
  }
  return entropies;
}

double JointEntropy(const GaussianModel& model) {
  // det(Sigma) = 1 / det(precision)
  return 0.5 * (GaussianEntropyConstant(model.dimension()) -
                LogDetSpd(model.precision(), "precision"));
}

LinearPredictor ConditionalPredictor(const GaussianModel& model, int target,
                                     std::span<const int> observed) {
  CheckPatch(model, target, "target");
  CheckObserved(model, target, observed);
  const int target_list[] = {target};
  const auto t = Coordinates(model, target_list);
  const auto s = Coordinates(model, observed);
  LinearPredictor predictor;
  const Eigen::VectorXd mean_t = Subvector(model.mean(), t);
  if (s.empty()) {
    predictor.gain.resize(model.patch_dim(), 0);
    predictor.offset = mean_t;
    return predictor;
  }
  const Eigen::MatrixXd& cov = model.covariance();
  Eigen::LLT<Eigen::MatrixXd> llt(Submatrix(cov, s, s));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("observed covariance block is singular");
  }
  predictor.gain = llt.solve(Submatrix(cov, s, t)).transpose();
  predictor.offset = mean_t - predictor.gain * Subvector(model.mean(), s);
  return predictor;
}

Eigen::VectorXd ConditionalMean(const GaussianModel& model,
                                const PatchField& field, int target,
                                std::span<const int> observed) {
  if (field.embeddings.rows() != model.n_patches() ||
      field.embeddings.cols() != model.patch_dim()) {
    throw InvalidInputError("field shape does not match model");
  }
  const auto predictor = ConditionalPredictor(model, target, observed);
  if (observed.empty()) return predictor.offset;
  const Eigen::VectorXd x = Subvector(field.Flat(), Coordinates(model, observed));
  return predictor.offset + predictor.gain * x;
}

std::string ModelToJson(const GaussianModel& model) {
  Json j;
  j["n_patches"] = model.n_patches();
  j["patch_dim"] = model.patch_dim();
  j["model_id"] = model.id();
  j["mean"] = std::vector<double>(model.mean().data(),
                                  model.mean().data() + model.mean().size());
  Json rows = Json::array();
  const auto& p = model.precision();
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = p(r, c);
    }
    rows.push_back(row);
  }
  j["precision"] = rows;
  j["spec"] = SpecToJson(model.spec());
  return j.dump(2) + "\n";
}

GaussianModel ModelFromJson(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    const int n = j.at("n_patches").get<int>();
    const int d = j.at("patch_dim").get<int>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto rows = j.at("precision").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd precision(static_cast<Eigen::Index>(rows.size()),
                              rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != precision.cols()) {
        throw InvalidInputError("precision rows are ragged");
      }
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        precision(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            rows[r][c];
      }
    }
    Eigen::VectorXd mean_vec =
        Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                          static_cast<Eigen::Index>(mean.size()));
    return GaussianModel(SpecFromJson(j.at("spec")), n, d, std::move(mean_vec),
                         std::move(precision));
  } catch (const Json::exception& e) {
    throw InvalidInputError(std::string("malformed model JSON: ") + e.what());
  }
}

std::string FieldsToJson(std::span<const PatchField> fields) {
  Json out = Json::array();
  for (const auto& field : fields) {
    Json j;
    j["model_id"] = field.model_id;
    j["seed"] = field.seed;
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < field.embeddings.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(field.embeddings.cols()));
      for (Eigen::Index c = 0; c < field.embeddings.cols(); ++c) {
        row[static_cast<std::size_t>(c)] = field.embeddings(r, c);
      }
      rows.push_back(row);
    }
    j["embeddings"] = rows;
    out.push_back(j);
  }
  return out.dump(2) + "\n";
}

std::vector<PatchField> FieldsFromJson(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    std::vector<PatchField> fields;
    for (const auto& item : j) {
      PatchField field;
      field.model_id = item.at("model_id").get<std::string>();
      field.seed = item.at("seed").get<std::uint64_t>();
      const auto rows =
          item.at("embeddings").get<std::vector<std::vector<double>>>();
      const Eigen::Index cols =
          rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
      field.embeddings.resize(static_cast<Eigen::Index>(rows.size()), cols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != cols) {
          throw InvalidInputError("field embeddings are ragged");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
          field.embeddings(static_cast<Eigen::Index>(r),
                           static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
      fields.push_back(std::move(field));
    }
    return fields;
  } catch (const Json::exception& e) {
    throw InvalidInputError(std::string("malformed field JSON: ") + e.what());
  }
}

}  // namespace collapse
