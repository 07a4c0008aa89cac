#include <benchmark/benchmark.h>

#include <random>

#include "hda/adapt.hpp"
#include "hda/losses.hpp"
#include "hda/metrics.hpp"
#include "hda/subspace.hpp"
#include "hda/world.hpp"

using namespace hda;

namespace {

std::vector<Vector> random_rows(std::size_t d, std::size_t k, std::uint64_t seed) {
  return sample_latents(d, k, seed);
}

struct Setup {
  World world = build_world(default_world_spec());
  SubspaceBank bank = build_subspace_bank(world);
  ResolvedRun resolved = resolve(AdaptationConfig{}, world);
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_BuildSubspace(benchmark::State& state) {
  const FeatureSet features(random_rows(static_cast<std::size_t>(state.range(0)), 10, 1));
  for (auto _ : state) benchmark::DoNotOptimize(build_subspace(features));
}
BENCHMARK(BM_BuildSubspace)->Arg(16)->Arg(32)->Arg(128);

void BM_Project(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  const DomainSubspace s = build_subspace(FeatureSet(random_rows(d, 10, 2)));
  const Vector p = random_rows(d, 1, 3).front();
  for (auto _ : state) benchmark::DoNotOptimize(subspace_distance_sq(s, p));
}
BENCHMARK(BM_Project)->Arg(16)->Arg(32)->Arg(128);

// One training step's objective and gradient: batch 4, three encoders, two domains.
void BM_ObjectiveStep(benchmark::State& state) {
  const Setup& s = setup();
  const auto view = training_view(s.world, s.bank, s.resolved);
  const GeneratorParams target = make_target_generator(s.world.source);
  const auto z = step_latents(8, static_cast<std::size_t>(state.range(0)), 7, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hda_objective(z, s.world.source, target, view, s.resolved.weights));
  }
}
BENCHMARK(BM_ObjectiveStep)->Arg(4)->Arg(16);

void BM_Evaluate(benchmark::State& state) {
  const Setup& s = setup();
  const auto domains = held_out_domains(s.world, s.bank, {"attr_a", "attr_b"});
  const GeneratorParams target = make_target_generator(s.world.source);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(target, s.world.source, s.world.held_out_encoder, domains,
                                      static_cast<std::size_t>(state.range(0)), 5));
  }
}
BENCHMARK(BM_Evaluate)->Arg(256);

void BM_Adaptation(benchmark::State& state) {
  const Setup& s = setup();
  AdaptationConfig c;
  c.steps = 300;
  for (auto _ : state) benchmark::DoNotOptimize(run_adaptation(c, s.world, s.bank));
}
BENCHMARK(BM_Adaptation)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
