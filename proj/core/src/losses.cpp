#include "hda/losses.hpp"

#include <cmath>

#include "hda/errors.hpp"

namespace hda {

void validate_weights(const std::vector<DomainWeight>& weights, std::size_t subspace_count) {
  if (weights.empty()) throw ConfigError("hybrid loss needs at least one domain");
  if (weights.size() != subspace_count) {
    throw ConfigError("got " + std::to_string(weights.size()) + " domain weights for " +
                      std::to_string(subspace_count) + " subspaces");
  }
  for (const auto& w : weights) {
    if (!(w.alpha > 0.0) || !std::isfinite(w.alpha)) {
      throw ConfigError("domain '" + w.domain_id + "' has non-positive alpha");
    }
  }
}

ad::Var project_var(ad::Var f_t, const DomainSubspace& subspace, Projection mode) {
  ad::Tape& tape = *f_t.tape();
  if (f_t.rows() != subspace.dimension() || f_t.cols() != 1) {
    throw DimensionError("projection: embedding has " + std::to_string(f_t.rows()) +
                         " rows, subspace dimension is " + std::to_string(subspace.dimension()));
  }
  if (mode == Projection::Detached) {
    return tape.constant(Matrix::column(project(subspace, f_t.value().values())));
  }
  ad::Var mean = tape.constant(Matrix::column(subspace.mean()));
  ad::Var coords = ad::matvec(tape.constant(subspace.basis_transposed()), f_t - mean);
  return ad::matvec(tape.constant(subspace.basis()), coords) + mean;
}

HybridTerms hybrid_terms(ad::Var f_s, ad::Var f_t, const SubspaceRefs& subspaces,
                         const std::vector<DomainWeight>& weights, Projection mode) {
  validate_weights(weights, subspaces.size());
  if (!f_s.value().same_shape(f_t.value())) throw DimensionError("f_s and f_t differ in shape");
  ad::Var dist;
  ad::Var perpendicular;
  for (std::size_t i = 0; i < subspaces.size(); ++i) {
    ad::Var residual = project_var(f_t, subspaces[i].get(), mode) - f_t;
    ad::Var d = weights[i].alpha * ad::squared_norm(residual);
    ad::Var p = weights[i].alpha * residual;
    dist = i == 0 ? d : dist + d;
    perpendicular = i == 0 ? p : perpendicular + p;
  }
  ad::Var displacement = f_t - f_s;
  ad::Var cosine = ad::dot(displacement, perpendicular) /
                   (ad::norm_eps(displacement, kNormEpsilon) * ad::norm_eps(perpendicular, kNormEpsilon));
  return {dist, 1.0 - cosine};
}

ad::Var hybrid_dist_loss(ad::Var f_t, const SubspaceRefs& subspaces, const std::vector<DomainWeight>& weights,
                         Projection mode) {
  validate_weights(weights, subspaces.size());
  ad::Var dist;
  for (std::size_t i = 0; i < subspaces.size(); ++i) {
    ad::Var d = weights[i].alpha * ad::squared_norm(project_var(f_t, subspaces[i].get(), mode) - f_t);
    dist = i == 0 ? d : dist + d;
  }
  return dist;
}

ad::Var hybrid_direct_loss(ad::Var f_s, ad::Var f_t, const SubspaceRefs& subspaces,
                           const std::vector<DomainWeight>& weights, Projection mode) {
  return hybrid_terms(f_s, f_t, subspaces, weights, mode).direct;
}

ad::Var dist_loss(ad::Var f_t, const DomainSubspace& subspace, Projection mode) {
  return hybrid_dist_loss(f_t, {std::cref(subspace)}, {{"", 1.0}}, mode);
}

ad::Var direct_loss(ad::Var f_s, ad::Var f_t, const DomainSubspace& subspace, Projection mode) {
  return hybrid_direct_loss(f_s, f_t, {std::cref(subspace)}, {{"", 1.0}}, mode);
}

ObjectiveResult hda_objective(const std::vector<Vector>& z_batch, const GeneratorParams& source,
                              const GeneratorParams& target, const std::vector<EncoderSubspaces>& encoders,
                              const std::vector<DomainWeight>& weights, const ObjectiveOptions& options) {
  if (z_batch.empty()) throw ConfigError("objective needs a non-empty latent batch");
  if (encoders.empty()) throw ConfigError("objective needs at least one encoder");
  if (options.dist_only && options.direct_only) throw ConfigError("dist_only and direct_only are exclusive");
  if (!(options.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(source.dims() == target.dims())) throw DimensionError("source and target generators differ in dims");
  for (const auto& e : encoders) {
    validate_weights(weights, e.subspaces.size());
    for (const auto& s : e.subspaces) {
      if (s.get().dimension() != e.encoder.get().output_dim()) {
        throw DimensionError("subspace dimension does not match encoder '" + e.encoder.get().id() + "'");
      }
    }
  }

  const double dist_weight = options.direct_only ? 0.0 : 1.0;
  const double direct_weight = options.dist_only ? 0.0 : options.lambda;
  const double inv_batch = 1.0 / static_cast<double>(z_batch.size());

  ObjectiveResult result;
  result.breakdown.lambda = options.lambda;
  result.breakdown.dist_weight = dist_weight;
  result.breakdown.direct_weight = direct_weight;
  for (const auto& e : encoders) result.breakdown.per_encoder.push_back({e.encoder.get().id(), 0.0, 0.0});
  result.gradient.assign(target.parameter_count(), 0.0);
  const Vector flat = target.flatten();

  for (const auto& z : z_batch) {
    const Vector x_s = source.forward(z);
    ad::Tape tape;
    ad::Var params = tape.variable(Matrix::column(flat));
    ad::Var x_t = generator_forward(bind_generator(target.dims(), params), tape.constant(Matrix::column(z)));
    ad::Var total;
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const Encoder& encoder = encoders[e].encoder.get();
      ad::Var f_s = tape.constant(Matrix::column(encoder.encode(x_s)));
      ad::Var f_t = encoder.encode(tape, x_t);
      const HybridTerms terms = hybrid_terms(f_s, f_t, encoders[e].subspaces, weights, options.projection);
      result.breakdown.per_encoder[e].dist_term += terms.dist.scalar() * inv_batch;
      result.breakdown.per_encoder[e].direct_term += terms.direct.scalar() * inv_batch;
      ad::Var term = dist_weight * terms.dist + direct_weight * terms.direct;
      total = e == 0 ? term : total + term;
    }
    const double sample_total = total.scalar();
    if (!std::isfinite(sample_total)) throw NumericalError("objective: non-finite loss");
    result.breakdown.total += sample_total * inv_batch;
    tape.backward(total);
    const auto g = params.grad().values();
    for (std::size_t i = 0; i < g.size(); ++i) result.gradient[i] += g[i] * inv_batch;
  }
  return result;
}

}  // namespace hda
