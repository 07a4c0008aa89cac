#include "hda/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>

#include "hda/losses.hpp"
#include "hda/world.hpp"

namespace hda {

bool GradCheckSuiteResult::passed() const {
  return !reports.empty() && std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed; });
}

double GradCheckSuiteResult::max_relative_error() const {
  double worst = 0.0;
  for (const auto& r : reports) worst = std::max(worst, r.max_relative_error);
  return worst;
}

namespace {

using ad::Tape;
using ad::Var;

Vector normal_vector(std::size_t n, std::uint64_t seed) { return sample_latents(n, 1, seed).front(); }

void merge(ad::GradCheckReport& into, const ad::GradCheckReport& r) {
  into.checked += r.checked;
  into.skipped += r.skipped;
  into.max_relative_error = std::max(into.max_relative_error, r.max_relative_error);
  into.max_skipped_abs_error = std::max(into.max_skipped_abs_error, r.max_skipped_abs_error);
  into.passed = into.passed && r.passed;
}

// A primitive check builds its scalar from a flat parameter vector of
// `size` entries; `weights` is a fixed random readout so vector outputs are
// reduced without masking any coordinate.
struct PrimitiveCase {
  std::string name;
  std::size_t size;
  std::function<Var(Tape&, Var, const Vector& weights)> program;
  std::size_t readout = 0;
};

std::vector<PrimitiveCase> primitive_cases() {
  constexpr std::size_t n = 6;
  auto readout = [](Tape& t, Var v, const Vector& w) {
    return ad::dot(t.constant(Matrix(v.rows(), v.cols(), Vector(w.begin(), w.begin() + v.value().size()))), v);
  };
  auto first = [](Var p) { return ad::slice(p, 0, n, 1); };
  auto second = [](Var p) { return ad::slice(p, n, n, 1); };
  return {
      {"add", 2 * n, [=](Tape& t, Var p, const Vector& w) { return readout(t, first(p) + second(p), w); }, n},
      {"subtract", 2 * n, [=](Tape& t, Var p, const Vector& w) { return readout(t, first(p) - second(p), w); }, n},
      {"constant_minus", n, [=](Tape& t, Var p, const Vector& w) { return readout(t, 1.5 - first(p), w); }, n},
      {"scale", n, [=](Tape& t, Var p, const Vector& w) { return readout(t, -2.5 * first(p), w); }, n},
      {"elementwise_mul", 2 * n,
       [=](Tape& t, Var p, const Vector& w) { return readout(t, first(p) * second(p), w); }, n},
      {"scalar_broadcast_mul", n + 1,
       [=](Tape& t, Var p, const Vector& w) { return readout(t, ad::slice(p, n, 1, 1) * first(p), w); }, n},
      {"divide", n + 1,
       [=](Tape& t, Var p, const Vector& w) {
         Var d = ad::slice(p, n, 1, 1);
         return readout(t, first(p) / (d * d + t.constant(Matrix::scalar(0.5))), w);
       },
       n},
      {"matvec", n * n + n,
       [=](Tape& t, Var p, const Vector& w) {
         return readout(t, ad::matvec(ad::slice(p, 0, n, n), ad::slice(p, n * n, n, 1)), w);
       },
       n},
      {"matmul", 4 * 3 + 3 * 5,
       [=](Tape& t, Var p, const Vector& w) {
         return readout(t, ad::matmul(ad::slice(p, 0, 4, 3), ad::slice(p, 12, 3, 5)), w);
       },
       20},
      {"tanh", n, [=](Tape& t, Var p, const Vector& w) { return readout(t, ad::tanh(first(p)), w); }, n},
      {"relu", n, [=](Tape& t, Var p, const Vector& w) { return readout(t, ad::relu(first(p)), w); }, n},
      {"sum", n, [=](Tape&, Var p, const Vector&) { return ad::sum(first(p) * first(p)); }, 0},
      {"squared_norm", n, [=](Tape&, Var p, const Vector&) { return ad::squared_norm(first(p)); }, 0},
      {"dot", 2 * n, [=](Tape&, Var p, const Vector&) { return ad::dot(first(p), second(p)); }, 0},
      {"norm_eps", n, [=](Tape&, Var p, const Vector&) { return ad::norm_eps(first(p), kNormEpsilon); }, 0},
      {"slice", 3 * n,
       [=](Tape& t, Var p, const Vector& w) { return readout(t, ad::slice(p, n, 2, 3), w); }, n},
  };
}

ad::GradCheckReport check_primitive(const PrimitiveCase& c, std::size_t instances, std::uint64_t seed,
                                    const ad::GradCheckOptions& options) {
  ad::GradCheckReport total;
  total.name = "primitive/" + c.name;
  total.step = options.step;
  total.tolerance = options.tolerance;
  total.passed = true;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    const Vector params = normal_vector(c.size, derive_seed(s, 0));
    const Vector weights = c.readout ? normal_vector(c.readout, derive_seed(s, 1)) : Vector{};
    const ad::ScalarProgram program = [&](Tape& t, Var p) { return c.program(t, p, weights); };
    merge(total, ad::grad_check(total.name, program, params, options));
  }
  return total;
}

DomainSubspace random_subspace(std::size_t dim, std::size_t k, std::uint64_t seed) {
  std::vector<EmbeddingVector> rows = sample_latents(dim, k, seed);
  return build_subspace(FeatureSet(std::move(rows)));
}

// Composite loss terms on random instances in R^6 with rank-2 subspaces.
// Parameters are [f_s; f_t]; f_t is pushed away from both the subspaces and
// f_s so no guarded norm is near its floor.
std::vector<ad::GradCheckReport> loss_checks(std::uint64_t seed, std::size_t instances,
                                             const ad::GradCheckOptions& options) {
  constexpr std::size_t d = 6;
  std::vector<ad::GradCheckReport> out;
  const std::vector<std::string> names = {"loss/dist", "loss/direct", "loss/hybrid_dist", "loss/hybrid_direct"};
  for (const auto& name : names) {
    ad::GradCheckReport r;
    r.name = name;
    r.step = options.step;
    r.tolerance = options.tolerance;
    r.passed = true;
    out.push_back(r);
  }
  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t s = derive_seed(seed, 1000 + i);
    const DomainSubspace p1 = random_subspace(d, 3, derive_seed(s, 0));
    const DomainSubspace p2 = random_subspace(d, 3, derive_seed(s, 1));
    const SubspaceRefs both = {std::cref(p1), std::cref(p2)};
    const std::vector<DomainWeight> weights = {{"a", 0.5}, {"b", 0.5}};
    Vector params = normal_vector(2 * d, derive_seed(s, 2));
    for (std::size_t j = d; j < 2 * d; ++j) params[j] = 3.0 * params[j];

    auto fs = [](Var p) { return ad::slice(p, 0, d, 1); };
    auto ft = [](Var p) { return ad::slice(p, d, d, 1); };
    merge(out[0], ad::grad_check(names[0], [&](Tape&, Var p) { return dist_loss(ft(p), p1); }, params, options));
    merge(out[1],
          ad::grad_check(names[1], [&](Tape&, Var p) { return direct_loss(fs(p), ft(p), p1); }, params, options));
    merge(out[2], ad::grad_check(names[2], [&](Tape&, Var p) { return hybrid_dist_loss(ft(p), both, weights); },
                                 params, options));
    merge(out[3], ad::grad_check(
                      names[3], [&](Tape&, Var p) { return hybrid_direct_loss(fs(p), ft(p), both, weights); },
                      params, options));
  }
  return out;
}

// Two encoders and two synthetic domains over a small generator. The target
// starts away from the source so the direction term is well defined.
ad::GradCheckReport objective_check(const std::string& name, std::uint64_t seed, bool hybrid,
                                    const ad::GradCheckOptions& options) {
  const GeneratorDims dims{3, 6, 8};
  const GeneratorParams source = make_source_generator(derive_seed(seed, 0), dims);
  GeneratorParams target = make_target_generator(source);
  {
    Vector flat = target.flatten();
    const Vector noise = normal_vector(flat.size(), derive_seed(seed, 1));
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += 0.1 * noise[j];
    target.assign_flat(flat);
  }
  const std::vector<Encoder> encoders = {Encoder({"toy_a", derive_seed(seed, 2), 8, 10, 5, 8}),
                                         Encoder({"toy_b", derive_seed(seed, 3), 8, 10, 5, 8})};
  std::vector<SyntheticDomainSpec> domains(2);
  for (std::size_t i = 0; i < domains.size(); ++i) {
    domains[i].id = i == 0 ? "a" : "b";
    domains[i].attribute_shift = Vector(dims.output, 0.0);
    domains[i].attribute_shift[i] = 2.0;
    domains[i].k = 3;
  }
  std::vector<DomainSubspace> subspaces;
  for (const auto& e : encoders) {
    for (std::size_t i = 0; i < domains.size(); ++i) {
      const auto refs = sample_domain_references(source, domains[i], derive_seed(seed, 10 + i));
      subspaces.push_back(build_subspace(encode_features(e, refs)));
    }
  }

  std::vector<EncoderSubspaces> view;
  std::vector<DomainWeight> weights;
  if (hybrid) {
    weights = {{"a", 0.5}, {"b", 0.5}};
    view.push_back({std::cref(encoders[0]), {std::cref(subspaces[0]), std::cref(subspaces[1])}});
    view.push_back({std::cref(encoders[1]), {std::cref(subspaces[2]), std::cref(subspaces[3])}});
  } else {
    weights = {{"a", 1.0}};
    view.push_back({std::cref(encoders[0]), {std::cref(subspaces[0])}});
  }
  const auto z = sample_latents(dims.latent, 2, derive_seed(seed, 4));
  const ObjectiveOptions objective{};

  const ObjectiveResult base = hda_objective(z, source, target, view, weights, objective);
  GeneratorParams probe = target;
  const ad::ValueFn value = [&](std::span<const double> p) {
    probe.assign_flat(p);
    return hda_objective(z, source, probe, view, weights, objective).breakdown.total;
  };
  return ad::compare_gradient(name, value, target.flatten(), base.gradient, options);
}

// Distance loss through the default world's first encoder and generator at
// initialization.
ad::GradCheckReport default_init_chain_check(const World& world, const ad::GradCheckOptions& options) {
  const Encoder& encoder = world.training_encoders.front();
  const DomainSubspace subspace =
      build_subspace(encode_features(encoder, world.references.at(world.spec.domains.front().id)));
  const GeneratorDims dims = world.source.dims();
  const auto z = sample_latents(dims.latent, 2, derive_seed(world.spec.seed, 5));
  const ad::ScalarProgram program = [&](Tape& t, Var p) {
    const GeneratorVars g = bind_generator(dims, p);
    Var total;
    for (const auto& zi : z) {
      Var term = dist_loss(encoder.encode(t, generator_forward(g, t.constant(Matrix::column(zi)))), subspace);
      total = total.valid() ? total + term : term;
    }
    return (1.0 / static_cast<double>(z.size())) * total;
  };
  return ad::grad_check("chain/dist_encoder_generator", program, world.source.flatten(), options);
}

// f_t - f_s nearly parallel to f* - f_t: the cosine is ~1, and coordinates
// orthogonal to the plane of the configuration have zero gradient.
ad::GradCheckReport collinear_direct_check(const ad::GradCheckOptions& options) {
  Matrix basis(3, 1, 0.0);
  basis(1, 0) = 1.0;
  const DomainSubspace line({3.0, 0.0, 0.0}, basis, {1.0});
  const Vector params = {0.0, 0.0, 0.0, 1.0, 1e-3, 0.0};
  const ad::ScalarProgram program = [&](Tape&, Var p) {
    return direct_loss(ad::slice(p, 0, 3, 1), ad::slice(p, 3, 3, 1), line);
  };
  return ad::grad_check("probe/direct_near_collinear", program, params, options);
}

}  // namespace

// The default-size chain has |f| ~ 1-20 and coordinates with |df/dp| ~ 1e-5,
// so the rounding term |f| u / h of a 1e-6 step swamps the tolerance there.
constexpr double kChainStep = 1e-4;

GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  GradCheckSuiteResult result;
  const std::size_t instances = options.full ? 100 : 5;
  for (const auto& c : primitive_cases()) {
    result.reports.push_back(check_primitive(c, instances, derive_seed(options.seed, 1), options.check));
  }
  for (auto& r : loss_checks(derive_seed(options.seed, 2), options.full ? 20 : 3, options.check)) {
    result.reports.push_back(std::move(r));
  }
  result.reports.push_back(objective_check("objective/single_domain", derive_seed(options.seed, 3), false,
                                           options.check));
  result.reports.push_back(objective_check("objective/hybrid_two_encoder", derive_seed(options.seed, 4), true,
                                           options.check));
  if (options.full) {
    const World world = build_world(default_world_spec());
    ad::GradCheckOptions coarse = options.check;
    coarse.step = kChainStep;
    result.reports.push_back(default_init_chain_check(world, coarse));
    result.recorded.push_back(default_init_chain_check(world, options.check));
  }
  result.recorded.push_back(collinear_direct_check(options.check));
  return result;
}

std::string format_gradcheck_report(const GradCheckSuiteResult& result) {
  std::string out;
  char line[256];
  auto emit = [&](const ad::GradCheckReport& r, const char* verdict) {
    std::snprintf(line, sizeof line, "%-34s h=%.0e checked=%5zu skipped=%4zu max_rel=%.3e skipped_abs=%.3e %s\n",
                  r.name.c_str(), r.step, r.checked, r.skipped, r.max_relative_error, r.max_skipped_abs_error,
                  verdict);
    out += line;
  };
  for (const auto& r : result.reports) emit(r, r.passed ? "PASS" : "FAIL");
  for (const auto& r : result.recorded) emit(r, r.passed ? "recorded (within tol)" : "recorded (over tol)");
  std::snprintf(line, sizeof line, "%zu checks, max relative error %.3e, tolerance %.1e: %s\n",
                result.reports.size(), result.max_relative_error(),
                result.reports.empty() ? 0.0 : result.reports.front().tolerance,
                result.passed() ? "PASS" : "FAIL");
  out += line;
  return out;
}

}  // namespace hda
