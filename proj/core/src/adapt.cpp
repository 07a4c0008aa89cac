#include "hda/adapt.hpp"

#include <cmath>
#include <set>

namespace hda {

void validate(const AdaptationConfig& c) {
  if (c.steps < 1) throw ConfigError("steps must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be >= 0");
  if (c.dist_only && c.direct_only) throw ConfigError("dist_only and direct_only are mutually exclusive");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(c.adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(c.grad_clip_norm >= 0.0)) throw ConfigError("grad_clip_norm must be >= 0");
  if (c.metric_every < 1) throw ConfigError("metric_every must be >= 1");
  if (c.eval_samples < 2) throw ConfigError("eval_samples must be >= 2");
  if (!(c.rank_tolerance > 0.0)) throw ConfigError("rank_tolerance must be > 0");
  for (const auto& w : c.weights) {
    if (!(w.alpha > 0.0)) throw ConfigError("domain '" + w.domain_id + "' has non-positive alpha");
  }
}

ResolvedRun resolve(const AdaptationConfig& config, const World& world) {
  ResolvedRun r;
  std::vector<std::string> domains = config.domain_ids;
  if (domains.empty()) {
    if (!config.weights.empty()) {
      for (const auto& w : config.weights) domains.push_back(w.domain_id);
    } else {
      for (const auto& d : world.spec.domains) domains.push_back(d.id);
    }
  }
  for (const auto& id : domains) (void)world.domain(id);
  if (std::set<std::string>(domains.begin(), domains.end()).size() != domains.size()) {
    throw ConfigError("duplicate domain id in config");
  }

  if (config.weights.empty()) {
    for (const auto& id : domains) r.weights.push_back({id, 1.0 / static_cast<double>(domains.size())});
  } else {
    if (config.weights.size() != domains.size()) throw ConfigError("weights and domain_ids disagree");
    for (std::size_t i = 0; i < domains.size(); ++i) {
      if (config.weights[i].domain_id != domains[i]) throw ConfigError("weights and domain_ids disagree");
    }
    r.weights = config.weights;
  }

  if (config.encoder_ids.empty()) {
    for (const auto& e : world.training_encoders) r.encoder_ids.push_back(e.id());
  } else {
    for (const auto& id : config.encoder_ids) {
      if (id == world.held_out_encoder.id()) {
        throw ConfigError("encoder '" + id + "' is reserved for evaluation");
      }
      bool found = false;
      for (const auto& e : world.training_encoders) found = found || e.id() == id;
      if (!found) throw ConfigError("unknown training encoder '" + id + "'");
    }
    r.encoder_ids = config.encoder_ids;
  }
  return r;
}

double clip_gradient_norm(std::span<double> grads, double max_norm) {
  const double norm = std::sqrt(squared_norm(grads));
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               const AdamSettings& s) {
  if (params.size() != grads.size()) throw DimensionError("adam: gradient length mismatch");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam: moment shapes do not match parameters");
  }
  if (!all_finite(grads)) {
    throw NumericalError("adam: non-finite gradient at optimizer step " + std::to_string(state.step + 1));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = s.beta1 * m + (1.0 - s.beta1) * grads[i];
    v = s.beta2 * v + (1.0 - s.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

std::vector<Vector> step_latents(std::size_t latent_dim, std::size_t batch_size, std::uint64_t seed,
                                 std::size_t step) {
  return sample_latents(latent_dim, batch_size, derive_seed(seed, step));
}

std::vector<EncoderSubspaces> training_view(const World& world, const SubspaceBank& bank,
                                            const ResolvedRun& resolved) {
  std::vector<EncoderSubspaces> view;
  for (const auto& id : resolved.encoder_ids) {
    EncoderSubspaces e{std::cref(world.encoder(id)), {}};
    for (const auto& w : resolved.weights) e.subspaces.push_back(std::cref(bank.at(id, w.domain_id)));
    view.push_back(std::move(e));
  }
  return view;
}

ObjectiveOptions objective_options(const AdaptationConfig& config) {
  ObjectiveOptions o;
  o.lambda = config.lambda;
  o.dist_only = config.dist_only;
  o.direct_only = config.direct_only;
  o.projection = config.detach_projection ? Projection::Detached : Projection::Attached;
  return o;
}

std::uint64_t evaluation_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 0xE7A1); }

namespace {

std::vector<std::string> domain_ids_of(const ResolvedRun& r) {
  std::vector<std::string> ids;
  for (const auto& w : r.weights) ids.push_back(w.domain_id);
  return ids;
}

}  // namespace

RunRecord run_adaptation(const AdaptationConfig& config, const World& world, const SubspaceBank& bank) {
  validate(config);
  const ResolvedRun resolved = resolve(config, world);
  const std::vector<std::string> domain_ids = domain_ids_of(resolved);
  if (domain_ids.size() >= 2) separability_precheck(world, domain_ids);

  const std::vector<EncoderSubspaces> view = training_view(world, bank, resolved);
  const std::vector<HeldOutDomain> held_out = held_out_domains(world, bank, domain_ids);
  const std::set<std::string> training_ids(resolved.encoder_ids.begin(), resolved.encoder_ids.end());
  const ObjectiveOptions options = objective_options(config);
  const AdamSettings adam{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps};
  const std::uint64_t eval_seed = evaluation_seed(config.seed);

  GeneratorParams target = make_target_generator(world.source);
  OptimizerState state;
  RunRecord record{config, resolved, {}, {}, {}, 0, target};
  record.log.reserve(config.steps);

  double best_consistency = -2.0;
  record.best_consistency_step = 1;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    if (step == 1 || step % config.metric_every == 0) {
      MetricsReport report = evaluate(target, world.source, world.held_out_encoder, held_out, config.eval_samples,
                                      eval_seed, training_ids);
      if (step > 1 && report.consistency > best_consistency) {
        best_consistency = report.consistency;
        record.best_consistency_step = step;
      }
      record.metrics.push_back({step, false, std::move(report)});
      record.checkpoints.insert_or_assign(step, target);
    }

    const auto z = step_latents(world.source.dims().latent, config.batch_size, config.seed, step);
    Vector flat = target.flatten();
    try {
      ObjectiveResult result = hda_objective(z, world.source, target, view, resolved.weights, options);
      if (!all_finite(result.gradient)) throw NumericalError("non-finite gradient");
      clip_gradient_norm(result.gradient, config.grad_clip_norm);
      adam_step(flat, result.gradient, state, adam);
      record.log.push_back({step, std::move(result.breakdown)});
      target.assign_flat(flat);
    } catch (const NumericalError& e) {
      throw AdaptationError("step " + std::to_string(step) + ": " + e.what(), step, target);
    }
  }

  record.metrics.push_back({config.steps, true,
                            evaluate(target, world.source, world.held_out_encoder, held_out, config.eval_samples,
                                     eval_seed, training_ids)});
  record.final_params = target;
  return record;
}

RunRecord run_single_domain(const AdaptationConfig& config, const World& world, const SubspaceBank& bank,
                            const std::string& domain_id) {
  AdaptationConfig single = config;
  single.domain_ids = {domain_id};
  single.weights = {{domain_id, 1.0}};
  return run_adaptation(single, world, bank);
}

double recompute_step_total(const RunRecord& record, const World& world, const SubspaceBank& bank,
                            std::size_t step) {
  auto it = record.checkpoints.find(step);
  if (it == record.checkpoints.end()) throw ConfigError("no checkpoint for step " + std::to_string(step));
  const auto z = step_latents(world.source.dims().latent, record.config.batch_size, record.config.seed, step);
  return hda_objective(z, world.source, it->second, training_view(world, bank, record.resolved),
                       record.resolved.weights, objective_options(record.config))
      .breakdown.total;
}

}  // namespace hda
