#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hda/autodiff.hpp"
#include "hda/subspace.hpp"
#include "hda/world.hpp"

namespace hda {

/// Epsilon inside every norm that appears in a denominator:
/// sqrt(|v|^2 + eps^2).
inline constexpr double kNormEpsilon = 1e-8;

struct DomainWeight {
  std::string domain_id;
  double alpha = 1.0;

  bool operator==(const DomainWeight&) const = default;
};

/// Whether gradients flow through the projected point f* or f* is treated as
/// a constant computed from the current value of f_t.
enum class Projection { Attached, Detached };

using SubspaceRefs = std::vector<std::reference_wrapper<const DomainSubspace>>;

/// f* = M M^T (f_t - mean) + mean on the tape.
ad::Var project_var(ad::Var f_t, const DomainSubspace& subspace, Projection mode = Projection::Attached);

/// |f* - f_t|^2
ad::Var dist_loss(ad::Var f_t, const DomainSubspace& subspace, Projection mode = Projection::Attached);

/// 1 - cos(f_t - f_s, f* - f_t), with epsilon-guarded norms.
ad::Var direct_loss(ad::Var f_s, ad::Var f_t, const DomainSubspace& subspace,
                    Projection mode = Projection::Attached);

/// sum_i alpha_i |f*_i - f_t|^2
ad::Var hybrid_dist_loss(ad::Var f_t, const SubspaceRefs& subspaces, const std::vector<DomainWeight>& weights,
                         Projection mode = Projection::Attached);

/// 1 - cos(f_t - f_s, sum_i alpha_i (f*_i - f_t))
ad::Var hybrid_direct_loss(ad::Var f_s, ad::Var f_t, const SubspaceRefs& subspaces,
                           const std::vector<DomainWeight>& weights, Projection mode = Projection::Attached);

struct HybridTerms {
  ad::Var dist;
  ad::Var direct;
};

/// Both hybrid terms sharing one set of projections.
HybridTerms hybrid_terms(ad::Var f_s, ad::Var f_t, const SubspaceRefs& subspaces,
                         const std::vector<DomainWeight>& weights, Projection mode = Projection::Attached);

struct EncoderTerms {
  std::string encoder_id;
  double dist_term = 0.0;
  double direct_term = 0.0;
};

/// Batch-mean loss terms of one objective evaluation.
/// total = sum over encoders of (dist_weight * dist_term + direct_weight * direct_term),
/// where normally dist_weight = 1 and direct_weight = lambda.
struct LossBreakdown {
  double total = 0.0;
  std::vector<EncoderTerms> per_encoder;
  double lambda = 1.0;
  double dist_weight = 1.0;
  double direct_weight = 1.0;
};

struct ObjectiveOptions {
  double lambda = 1.0;
  bool dist_only = false;
  bool direct_only = false;
  Projection projection = Projection::Attached;
};

/// One training encoder with its subspaces, ordered like the weights.
struct EncoderSubspaces {
  std::reference_wrapper<const Encoder> encoder;
  SubspaceRefs subspaces;
};

struct ObjectiveResult {
  LossBreakdown breakdown;
  /// d(total)/d(target parameters), flat layout of GeneratorParams.
  Vector gradient;
};

/// Batch mean over z of sum over encoders of (L'_dist + lambda * L'_direct).
/// Each sample is evaluated on its own tape; per-sample gradients are reduced
/// in batch order. Source generator and encoders are constants.
ObjectiveResult hda_objective(const std::vector<Vector>& z_batch, const GeneratorParams& source,
                              const GeneratorParams& target, const std::vector<EncoderSubspaces>& encoders,
                              const std::vector<DomainWeight>& weights, const ObjectiveOptions& options = {});

/// Throws ConfigError for an empty list, non-positive alpha or a count mismatch.
void validate_weights(const std::vector<DomainWeight>& weights, std::size_t subspace_count);

}  // namespace hda
