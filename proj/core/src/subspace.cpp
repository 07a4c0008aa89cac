#include "hda/subspace.hpp"

#include <cmath>

#include "hda/errors.hpp"

namespace hda {

FeatureSet::FeatureSet(std::vector<EmbeddingVector> features) : features_(std::move(features)) {
  if (features_.empty()) throw DimensionError("FeatureSet needs at least one feature");
  const std::size_t d = features_.front().size();
  if (d == 0) throw DimensionError("FeatureSet features must be non-empty");
  for (const auto& f : features_) {
    if (f.size() != d) throw DimensionError("FeatureSet features have different lengths");
    if (!all_finite(f)) throw DimensionError("FeatureSet contains a non-finite entry");
  }
  mean_.assign(d, 0.0);
  for (const auto& f : features_)
    for (std::size_t i = 0; i < d; ++i) mean_[i] += f[i];
  const double inv_k = 1.0 / static_cast<double>(features_.size());
  for (double& m : mean_) m *= inv_k;
}

DomainSubspace::DomainSubspace(EmbeddingVector mean, Matrix basis, Vector singular_values)
    : mean_(std::move(mean)), basis_(std::move(basis)), singular_values_(std::move(singular_values)) {
  const std::size_t d = mean_.size();
  const std::size_t r = singular_values_.size();
  if (d == 0) throw DimensionError("subspace mean is empty");
  if (basis_.rows() != d || basis_.cols() != r) {
    throw DimensionError("subspace basis must be " + std::to_string(d) + "x" + std::to_string(r));
  }
  if (!all_finite(mean_) || !all_finite(basis_.values()) || !all_finite(singular_values_)) {
    throw NumericalError("subspace contains non-finite values");
  }
  for (std::size_t i = 0; i < r; ++i) {
    if (!(singular_values_[i] > 0.0)) throw NumericalError("singular values must be positive");
    if (i > 0 && singular_values_[i] > singular_values_[i - 1]) {
      throw NumericalError("singular values must be descending");
    }
  }
  basis_t_ = basis_.transposed();
  const Matrix gram = matmul(basis_t_, basis_);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(gram(i, j) - expected) > 1e-10) {
        throw NumericalError("subspace basis is not orthonormal");
      }
    }
}

DomainSubspace build_subspace(const FeatureSet& features, const SubspaceOptions& options) {
  if (!(options.rank_tolerance > 0.0)) throw ConfigError("rank_tolerance must be positive");
  const std::size_t k = features.count();
  const std::size_t d = features.dimension();
  if (k < 2) {
    if (k == 1 && options.allow_point_subspace) {
      return DomainSubspace(features.mean(), Matrix(d, 0), {});
    }
    throw DegenerateDomain("a domain needs at least 2 reference features to span a subspace (got " +
                           std::to_string(k) + ")");
  }

  Matrix centered(d, k);
  for (std::size_t j = 0; j < k; ++j) {
    centered.set_column(j, subtract(features.features()[j], features.mean()));
  }
  const ThinSvd svd = thin_svd(centered);
  const double sigma_max = svd.singular_values.front();
  if (!(sigma_max > 0.0)) {
    throw DegenerateDomain("all centered reference features are zero");
  }

  std::size_t rank = 0;
  while (rank < svd.singular_values.size() &&
         svd.singular_values[rank] > options.rank_tolerance * sigma_max) {
    ++rank;
  }
  Matrix basis(d, rank);
  Vector sigma(svd.singular_values.begin(), svd.singular_values.begin() + rank);
  for (std::size_t j = 0; j < rank; ++j) basis.set_column(j, svd.u.column_vector(j));
  orthonormalize_columns(basis);
  return DomainSubspace(features.mean(), std::move(basis), std::move(sigma));
}

EmbeddingVector project(const DomainSubspace& subspace, std::span<const double> point) {
  if (point.size() != subspace.dimension()) {
    throw DimensionError("project: point has length " + std::to_string(point.size()) +
                         ", subspace dimension is " + std::to_string(subspace.dimension()));
  }
  const Vector offset = subtract(point, subspace.mean());
  const Vector coords = matvec(subspace.basis_transposed(), offset);
  return add(matvec(subspace.basis(), coords), subspace.mean());
}

double subspace_distance_sq(const DomainSubspace& subspace, std::span<const double> point) {
  return squared_norm(subtract(project(subspace, point), point));
}

std::vector<PlanePoint> pca2d_export(const std::vector<LabeledFeatures>& feature_sets) {
  std::size_t total = 0;
  std::size_t d = 0;
  for (const auto& set : feature_sets) {
    if (d == 0) d = set.features.dimension();
    if (set.features.dimension() != d) throw DimensionError("pca2d_export: feature sets differ in dimension");
    total += set.features.count();
  }
  if (total < 3) {
    throw DegenerateDomain("pca2d_export needs at least 3 points, got " + std::to_string(total));
  }

  Vector pooled_mean(d, 0.0);
  for (const auto& set : feature_sets)
    for (const auto& f : set.features.features())
      for (std::size_t i = 0; i < d; ++i) pooled_mean[i] += f[i];
  for (double& m : pooled_mean) m /= static_cast<double>(total);

  // Principal directions are the left singular vectors of the d x N centered data.
  Matrix centered(d, total);
  std::size_t col = 0;
  for (const auto& set : feature_sets)
    for (const auto& f : set.features.features()) centered.set_column(col++, subtract(f, pooled_mean));
  const ThinSvd svd = thin_svd(centered);

  std::vector<Vector> axes;
  const double sigma_max = svd.singular_values.empty() ? 0.0 : svd.singular_values.front();
  for (std::size_t j = 0; j < svd.singular_values.size() && axes.size() < 2; ++j) {
    if (!(svd.singular_values[j] > 1e-12 * sigma_max)) break;
    Vector axis = svd.u.column_vector(j);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(axis[i]) > std::abs(axis[arg])) arg = i;
    if (axis[arg] < 0.0)
      for (double& a : axis) a = -a;
    axes.push_back(std::move(axis));
  }

  std::vector<PlanePoint> out;
  out.reserve(total);
  for (const auto& set : feature_sets) {
    for (const auto& f : set.features.features()) {
      const Vector c = subtract(f, pooled_mean);
      out.push_back({set.domain_id, axes.size() > 0 ? dot(axes[0], c) : 0.0,
                     axes.size() > 1 ? dot(axes[1], c) : 0.0});
    }
  }
  return out;
}

}  // namespace hda
