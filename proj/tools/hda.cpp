#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "hda/ablation.hpp"
#include "hda/adapt.hpp"
#include "hda/diagnostics.hpp"
#include "hda/io.hpp"
#include "hda/metrics.hpp"
#include "hda/world.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::optional<std::uint64_t> seed_of(const CLI::Option* opt, std::uint64_t value) {
  return opt->count() ? std::optional<std::uint64_t>(value) : std::nullopt;
}

hda::AdaptationConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  hda::AdaptationConfig config = hda::io::config_from_json(hda::io::read_text(path));
  if (seed) config.seed = *seed;
  return config;
}

hda::SubspaceBank bank_for(const hda::World& world, const hda::AdaptationConfig& config,
                           const std::string& subspace_dir) {
  if (!subspace_dir.empty()) return hda::io::load_subspace_bank(subspace_dir);
  return hda::build_subspace_bank(world, {config.rank_tolerance, config.allow_point_subspace});
}

int gen_world(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  const hda::WorldSpec spec = hda::io::world_spec_from_config(hda::io::read_text(config_path), seed);
  const hda::World world = hda::build_world(spec);
  hda::io::save_world(world, out);
  std::printf("world: seed %llu, %zu domains, %zu training encoders -> %s\n",
              static_cast<unsigned long long>(spec.seed), spec.domains.size(), spec.training_encoders.size(),
              out.string().c_str());
  return kExitOk;
}

int build_subspaces(const fs::path& world_dir, const fs::path& out, double rank_tolerance) {
  const hda::World world = hda::io::load_world(world_dir);
  const hda::SubspaceBank bank = hda::build_subspace_bank(world, {rank_tolerance, false});
  hda::io::save_subspace_bank(bank, out);
  for (const auto& [key, s] : bank.subspaces) {
    std::printf("%-10s %-8s rank %zu of %zu\n", key.first.c_str(), key.second.c_str(), s.rank(), s.dimension());
  }
  return kExitOk;
}

int adapt(const fs::path& config_path, const fs::path& world_dir, const fs::path& out,
          std::optional<std::uint64_t> seed, const std::string& subspace_dir) {
  const hda::AdaptationConfig config = load_config(config_path, seed);
  const hda::World world = hda::io::load_world(world_dir);
  const hda::SubspaceBank bank = bank_for(world, config, subspace_dir);
  const hda::RunRecord record = hda::run_adaptation(config, world, bank);
  hda::io::save_run(record, world, out);

  const auto& first = record.first_metrics().report;
  const auto& last = record.final_metrics().report;
  std::printf("steps %zu  loss %.6g -> %.6g  consistency %.4f  diversity %.4f\n", config.steps,
              record.log.front().breakdown.total, record.log.back().breakdown.total, last.consistency,
              last.diversity);
  for (const auto& s : last.semantic_similarity) {
    std::printf("  %-8s semantic_similarity %.6g -> %.6g\n", s.domain_id.c_str(),
                first.semantic_similarity_of(s.domain_id), s.semantic_similarity);
  }
  return kExitOk;
}

int eval(const fs::path& run_dir, const fs::path& out, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> step) {
  const hda::AdaptationConfig config = hda::io::config_from_json(hda::io::read_text(run_dir / "config.json"));
  const hda::World world = hda::io::load_world(run_dir / "world");
  fs::path params_path = run_dir / "final_generator.json";
  if (step) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.json", *step);
    params_path = run_dir / "checkpoints" / name;
  }
  const hda::GeneratorParams target = hda::io::generator_from_json(hda::io::read_text(params_path));
  const hda::ResolvedRun resolved = hda::resolve(config, world);
  const hda::SubspaceBank bank = hda::build_subspace_bank(world, {config.rank_tolerance, config.allow_point_subspace});

  std::vector<std::string> domains;
  for (const auto& w : resolved.weights) domains.push_back(w.domain_id);
  const std::set<std::string> training(resolved.encoder_ids.begin(), resolved.encoder_ids.end());
  const hda::MetricsReport report =
      hda::evaluate(target, world.source, world.held_out_encoder, hda::held_out_domains(world, bank, domains),
                    config.eval_samples, seed.value_or(hda::evaluation_seed(config.seed)), training);
  const std::string json = hda::io::report_to_json(report);
  hda::io::write_text(out, json);
  std::cout << json;
  return kExitOk;
}

int ablate(const fs::path& config_path, const fs::path& world_dir, const fs::path& out,
           std::optional<std::uint64_t> seed) {
  const hda::AdaptationConfig config = load_config(config_path, seed);
  const hda::World world = hda::io::load_world(world_dir);
  const hda::SubspaceBank bank = bank_for(world, config, "");
  const hda::AblationTable table = hda::ablation_suite(config, world, bank);
  fs::create_directories(out);
  const std::string csv = hda::io::ablation_to_csv(table);
  hda::io::write_text(out / "ablation.csv", csv);
  hda::io::write_text(out / "ablation.json", hda::io::ablation_to_json(table));
  std::cout << csv;
  return kExitOk;
}

int gradcheck(bool full, std::uint64_t seed) {
  hda::GradCheckSuiteOptions options;
  options.full = full;
  options.seed = seed;
  const hda::GradCheckSuiteResult result = hda::run_gradcheck_suite(options);
  std::cout << hda::format_gradcheck_report(result);
  return result.passed() ? kExitOk : kExitNumerical;
}

int export_viz(const fs::path& world_dir, const fs::path& out, std::string encoder_id) {
  const hda::World world = hda::io::load_world(world_dir);
  if (encoder_id.empty()) encoder_id = world.training_encoders.front().id();
  const hda::Encoder& encoder =
      encoder_id == world.held_out_encoder.id() ? world.held_out_encoder : world.encoder(encoder_id);
  std::vector<hda::LabeledFeatures> sets;
  for (const auto& d : world.spec.domains) {
    sets.push_back({d.id, hda::encode_features(encoder, world.references.at(d.id))});
  }
  const auto points = hda::pca2d_export(sets);
  hda::io::write_text(out, hda::io::plane_points_to_csv(points));
  std::printf("%zu points from %zu domains under %s -> %s\n", points.size(), sets.size(), encoder_id.c_str(),
              out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid domain adaptation in embedding subspaces"};
  app.require_subcommand(1);

  std::string config, world, out, run, subspaces, encoder;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double rank_tolerance = 1e-8;
  bool full = false;

  auto* gen = app.add_subcommand("gen-world", "Sample domain references and write the world spec");
  gen->add_option("--config", config, "Config JSON; its \"world\" member describes the world")->required();
  gen->add_option("--out", out, "Output directory")->required();
  auto* gen_seed = gen->add_option("--seed", seed, "World seed (overrides the config)");

  auto* subs = app.add_subcommand("build-subspaces", "Write one subspace per (encoder, domain)");
  subs->add_option("--world", world, "World directory")->required();
  subs->add_option("--out", out, "Output directory")->required();
  subs->add_option("--rank-tolerance", rank_tolerance, "Relative singular-value cutoff");

  auto* adp = app.add_subcommand("adapt", "Adapt the target generator");
  adp->add_option("--config", config, "Config JSON")->required();
  adp->add_option("--world", world, "World directory")->required();
  adp->add_option("--out", out, "Run directory")->required();
  adp->add_option("--subspaces", subspaces, "Subspace directory from build-subspaces");
  auto* adp_seed = adp->add_option("--seed", seed, "Run seed (overrides the config)");

  auto* ev = app.add_subcommand("eval", "Score a run's generator under the held-out encoder");
  ev->add_option("--run", run, "Run directory")->required();
  ev->add_option("--out", out, "Report JSON")->required();
  auto* ev_step = ev->add_option("--step", step, "Score checkpoint step_NNNN instead of the final generator");
  auto* ev_seed = ev->add_option("--seed", seed, "Evaluation seed (default: derived from the run seed)");

  auto* abl = app.add_subcommand("ablate", "Loss x encoder-set ablation table");
  abl->add_option("--config", config, "Config JSON")->required();
  abl->add_option("--world", world, "World directory")->required();
  abl->add_option("--out", out, "Output directory")->required();
  auto* abl_seed = abl->add_option("--seed", seed, "Shared run seed (overrides the config)");

  auto* gc = app.add_subcommand("gradcheck", "Compare tape gradients with central differences");
  gc->add_flag("--full", full, "More random instances and the default-size chain");
  gc->add_option("--seed", seed, "Seed of the random instances")->default_val(1);

  auto* viz = app.add_subcommand("export-viz", "Project reference embeddings onto their top-2 PCA plane");
  viz->add_option("--world", world, "World directory")->required();
  viz->add_option("--out", out, "Coordinates CSV")->required();
  viz->add_option("--encoder", encoder, "Encoder id (default: first training encoder)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*gen) return gen_world(config, out, seed_of(gen_seed, seed));
    if (*subs) return build_subspaces(world, out, rank_tolerance);
    if (*adp) return adapt(config, world, out, seed_of(adp_seed, seed), subspaces);
    if (*ev) {
      return eval(run, out, seed_of(ev_seed, seed),
                  ev_step->count() ? std::optional<std::size_t>(step) : std::nullopt);
    }
    if (*abl) return ablate(config, world, out, seed_of(abl_seed, seed));
    if (*gc) return gradcheck(full, seed);
    if (*viz) return export_viz(world, out, encoder);
  } catch (const hda::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const hda::SeparabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
