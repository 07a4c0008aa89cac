#pragma once

#include <string>
#include <vector>

#include "hda/linalg.hpp"

namespace hda {

/// A point in an encoder's feature space.
using EmbeddingVector = Vector;

/// The k reference embeddings of one domain together with their mean.
class FeatureSet {
 public:
  /// Throws DimensionError on empty input, ragged lengths or non-finite entries.
  explicit FeatureSet(std::vector<EmbeddingVector> features);

  std::size_t count() const { return features_.size(); }
  std::size_t dimension() const { return mean_.size(); }
  const std::vector<EmbeddingVector>& features() const { return features_; }
  const EmbeddingVector& mean() const { return mean_; }

 private:
  std::vector<EmbeddingVector> features_;
  EmbeddingVector mean_;
};

struct SubspaceOptions {
  /// Singular directions with sigma <= rank_tolerance * sigma_max are dropped.
  double rank_tolerance = 1e-8;
  /// Accept k = 1 and build a rank-0 subspace that projects everything onto
  /// the single reference.
  bool allow_point_subspace = false;
};

/// Affine subspace {mean + basis * c}. The basis has orthonormal columns.
/// Immutable once built.
class DomainSubspace {
 public:
  /// Validates shapes, finiteness, positive descending singular values and
  /// orthonormality of the basis (1e-10 per entry).
  DomainSubspace(EmbeddingVector mean, Matrix basis, Vector singular_values);

  std::size_t dimension() const { return mean_.size(); }
  std::size_t rank() const { return basis_.cols(); }
  const EmbeddingVector& mean() const { return mean_; }
  const Matrix& basis() const { return basis_; }
  const Matrix& basis_transposed() const { return basis_t_; }
  const Vector& singular_values() const { return singular_values_; }

 private:
  EmbeddingVector mean_;
  Matrix basis_;
  Matrix basis_t_;
  Vector singular_values_;
};

DomainSubspace build_subspace(const FeatureSet& features, const SubspaceOptions& options = {});

/// Closest point of the subspace: basis * basis^T * (point - mean) + mean.
EmbeddingVector project(const DomainSubspace& subspace, std::span<const double> point);

/// Squared distance between a point and its projection.
double subspace_distance_sq(const DomainSubspace& subspace, std::span<const double> point);

struct LabeledFeatures {
  std::string domain_id;
  FeatureSet features;
};

struct PlanePoint {
  std::string domain_id;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const PlanePoint&) const = default;
};

/// Projects every feature onto the top two principal directions of the pooled,
/// centered features. Each axis is sign-normalized so its largest-magnitude
/// component is positive. Throws DegenerateDomain with fewer than 3 points.
std::vector<PlanePoint> pca2d_export(const std::vector<LabeledFeatures>& feature_sets);

}  // namespace hda
