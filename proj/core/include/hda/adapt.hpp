#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hda/errors.hpp"
#include "hda/losses.hpp"
#include "hda/metrics.hpp"
#include "hda/world.hpp"

namespace hda {

struct AdaptationConfig {
  double lambda = 1.0;
  /// Empty: every domain in `domain_ids` with alpha = 1 / N.
  std::vector<DomainWeight> weights;
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  double learning_rate = 2e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global L2 clip applied to each step's gradient before Adam; 0 disables.
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 1;
  bool dist_only = false;
  bool direct_only = false;
  bool detach_projection = false;
  /// Training encoders to sum over; empty means all of the world's.
  std::vector<std::string> encoder_ids;
  /// Target domains; empty means the weights' domains, or all world domains.
  std::vector<std::string> domain_ids;
  std::size_t metric_every = 25;
  std::size_t eval_samples = 256;
  double rank_tolerance = 1e-8;
  bool allow_point_subspace = false;

  bool operator==(const AdaptationConfig&) const = default;
};

/// Throws ConfigError when an invariant is violated (steps, batch size,
/// learning rate, lambda, exclusive ablation flags, Adam constants).
void validate(const AdaptationConfig& config);

/// Weights and encoders a config resolves to against a concrete world.
struct ResolvedRun {
  std::vector<DomainWeight> weights;
  std::vector<std::string> encoder_ids;
};

ResolvedRun resolve(const AdaptationConfig& config, const World& world);

struct AdamSettings {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  Vector first_moment;
  Vector second_moment;
  std::size_t step = 0;
};

/// Rescales `grads` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping. `max_norm` = 0 leaves the gradient untouched.
double clip_gradient_norm(std::span<double> grads, double max_norm);

/// One bias-corrected Adam update in place. Moments are sized lazily on the
/// first call. Throws NumericalError (naming the step) on a non-finite gradient.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               const AdamSettings& settings);

struct StepLog {
  std::size_t step = 0;
  LossBreakdown breakdown;
};

struct MetricSnapshot {
  /// Step whose pre-update parameters were evaluated; `final` marks the
  /// parameters after the last update.
  std::size_t step = 0;
  bool final = false;
  MetricsReport report;
};

struct RunRecord {
  AdaptationConfig config;
  ResolvedRun resolved;
  std::vector<StepLog> log;
  std::vector<MetricSnapshot> metrics;
  /// Parameters going into update `step`, taken at every metric snapshot.
  std::map<std::size_t, GeneratorParams> checkpoints;
  std::size_t best_consistency_step = 0;
  GeneratorParams final_params;

  const MetricSnapshot& first_metrics() const { return metrics.front(); }
  const MetricSnapshot& final_metrics() const { return metrics.back(); }
};

/// Raised when training hits a non-finite value; carries the parameters of
/// the last step that completed cleanly.
class AdaptationError : public NumericalError {
 public:
  AdaptationError(const std::string& what, std::size_t step, GeneratorParams last_good)
      : NumericalError(what), step_(step), last_good_(std::move(last_good)) {}

  std::size_t step() const { return step_; }
  const GeneratorParams& last_good() const { return last_good_; }

 private:
  std::size_t step_;
  GeneratorParams last_good_;
};

/// Latent minibatch for a step; a pure function of (seed, step).
std::vector<Vector> step_latents(std::size_t latent_dim, std::size_t batch_size, std::uint64_t seed,
                                 std::size_t step);

/// Training encoders paired with their per-domain subspaces, ordered like
/// `resolved.weights`.
std::vector<EncoderSubspaces> training_view(const World& world, const SubspaceBank& bank,
                                            const ResolvedRun& resolved);

ObjectiveOptions objective_options(const AdaptationConfig& config);

/// Seed of the metric snapshots of a run; evaluation draws from its own
/// stream so snapshots do not depend on the training minibatches.
std::uint64_t evaluation_seed(std::uint64_t run_seed);

/// Runs the separability precheck (two or more domains), then `steps`
/// iterations of sample -> generate -> encode -> objective -> backward -> Adam.
RunRecord run_adaptation(const AdaptationConfig& config, const World& world, const SubspaceBank& bank);

/// run_adaptation restricted to one domain with alpha = 1.
RunRecord run_single_domain(const AdaptationConfig& config, const World& world, const SubspaceBank& bank,
                            const std::string& domain_id);

/// Recomputes the logged total of `step` from its checkpoint.
double recompute_step_total(const RunRecord& record, const World& world, const SubspaceBank& bank,
                            std::size_t step);

}  // namespace hda
