// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes. `--sweep N` adds a per-seed table for the
// adaptation criteria.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <sys/wait.h>

#include "hda/ablation.hpp"
#include "hda/adapt.hpp"
#include "hda/diagnostics.hpp"
#include "hda/io.hpp"
#include "hda/losses.hpp"
#include "hda/subspace.hpp"
#include "hda/world.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hda;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Thresholds {
  double min_consistency_gain = 0.2;
  double min_similarity_drop = 0.9;
  double separability_factor = 3.0;
};

Thresholds load_thresholds(const fs::path& path) {
  const auto j = nlohmann::json::parse(io::read_text(path));
  Thresholds t;
  t.min_consistency_gain = j.at("collapse").at("min_relative_consistency_gain").get<double>();
  t.min_similarity_drop = j.at("single_domain").at("min_similarity_drop").get<double>();
  t.separability_factor = j.at("separability_factor").get<double>();
  return t;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// ---- 1: projection oracle --------------------------------------------------

// Least squares over affine-hull coordinates: min_c |x_0 + D c - p|^2 with
// D = [x_1 - x_0, ..., x_{k-1} - x_0], solved by Householder QR.
double affine_hull_distance_sq(const std::vector<Vector>& features, const Vector& p) {
  const Eigen::Index d = static_cast<Eigen::Index>(p.size());
  const Eigen::Index k = static_cast<Eigen::Index>(features.size());
  const Eigen::VectorXd x0 = oracle::to_eigen(features[0]);
  Eigen::MatrixXd dm(d, k - 1);
  for (Eigen::Index j = 1; j < k; ++j) dm.col(j - 1) = oracle::to_eigen(features[j]) - x0;
  const Eigen::VectorXd rhs = oracle::to_eigen(p) - x0;
  const Eigen::VectorXd c = dm.householderQr().solve(rhs);
  return (dm * c - rhs).squaredNorm();
}

Outcome projection_oracle() {
  std::mt19937_64 rng(20240101);
  double max_rel = 0.0, max_idem = 0.0, max_orth = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    // k - 1 < d keeps the hull a proper subspace, so the residual is not
    // rounding noise.
    const std::size_t d = 2 + rng() % 31;
    const std::size_t k = 2 + rng() % std::min<std::size_t>(9, d - 1);
    const auto features = oracle::random_features(d, k, rng);
    const DomainSubspace s = build_subspace(FeatureSet(features));
    const Vector p = oracle::random_vector(d, rng, 3.0);
    max_rel = std::max(max_rel, oracle::relative_difference(subspace_distance_sq(s, p),
                                                            affine_hull_distance_sq(features, p)));
    const Vector once = project(s, p);
    const Vector twice = project(s, once);
    for (std::size_t j = 0; j < d; ++j) max_idem = std::max(max_idem, std::abs(once[j] - twice[j]));
    const Eigen::VectorXd orth = oracle::to_eigen(s.basis()).transpose() * oracle::to_eigen(subtract(once, p));
    max_orth = std::max(max_orth, orth.cwiseAbs().maxCoeff());
  }
  const bool ok = max_rel <= 1e-10 && max_idem <= 1e-12 && max_orth <= 1e-9;
  return {ok, fmt("%d pairs: max rel %.2e (<=1e-10), idempotence %.2e (<=1e-12), orthogonality %.2e (<=1e-9)", n,
                  max_rel, max_idem, max_orth)};
}

// ---- 2: gradient correctness ------------------------------------------------

Outcome gradient_check() {
  GradCheckSuiteOptions options;
  options.full = true;
  const GradCheckSuiteResult result = run_gradcheck_suite(options);
  std::size_t skipped = 0;
  for (const auto& r : result.reports) skipped += r.skipped;
  std::string recorded;
  for (const auto& r : result.recorded) {
    recorded += fmt("; recorded %s h=%.0e max rel %.2e", r.name.c_str(), r.step, r.max_relative_error);
  }
  return {result.passed() && result.max_relative_error() <= 1e-5,
          fmt("%zu checks, max rel %.2e (<=1e-5), %zu near-zero-gradient coordinates reported separately",
              result.reports.size(), result.max_relative_error(), skipped) +
              recorded};
}

// ---- 3: reduction identities ------------------------------------------------

DomainSubspace random_subspace(std::size_t d, std::mt19937_64& rng) {
  return build_subspace(FeatureSet(oracle::random_features(d, 2 + rng() % 5, rng)));
}

Vector affine(const Vector& v, double c, const Vector& shift) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = c * v[i] + shift[i];
  return out;
}

Outcome reduction_identities() {
  std::mt19937_64 rng(31337);
  const int n = 1000;
  int exact = 0, translation = 0, scale = 0;
  std::uniform_real_distribution<double> uniform(0.1, 10.0);
  const auto dist = [](const Vector& ft, const DomainSubspace& s) {
    ad::Tape t;
    return dist_loss(t.constant(Matrix::column(ft)), s).scalar();
  };
  const auto direct = [](const Vector& fs, const Vector& ft, const DomainSubspace& s) {
    ad::Tape t;
    return direct_loss(t.constant(Matrix::column(fs)), t.constant(Matrix::column(ft)), s).scalar();
  };
  for (int i = 0; i < n; ++i) {
    // d > rank, so f* - f_t is not rounding noise under the epsilon guard.
    const std::size_t d = 6 + rng() % 12;
    const DomainSubspace s = random_subspace(d, rng);
    const Vector fs = oracle::random_vector(d, rng), ft = oracle::random_vector(d, rng, 2.0);

    ad::Tape t;
    const ad::Var vs = t.constant(Matrix::column(fs)), vt = t.constant(Matrix::column(ft));
    const SubspaceRefs one = {std::cref(s)};
    const std::vector<DomainWeight> w = {{"x", 1.0}};
    exact += hybrid_dist_loss(vt, one, w).scalar() == dist_loss(vt, s).scalar() &&
             hybrid_direct_loss(vs, vt, one, w).scalar() == direct_loss(vs, vt, s).scalar();

    const Vector shift = oracle::random_vector(d, rng, 5.0);
    const DomainSubspace moved(affine(s.mean(), 1.0, shift), s.basis(), s.singular_values());
    const Vector fs_moved = affine(fs, 1.0, shift), ft_moved = affine(ft, 1.0, shift);
    translation += std::abs(dist(ft_moved, moved) - dist(ft, s)) <= 1e-10 &&
                   std::abs(direct(fs_moved, ft_moved, moved) - direct(fs, ft, s)) <= 1e-10;

    const double c = uniform(rng);
    const Vector zero(d, 0.0);
    const DomainSubspace big(affine(s.mean(), c, zero), s.basis(),
                             affine(s.singular_values(), c, Vector(s.rank(), 0.0)));
    const double base = dist(ft, s);
    scale += std::abs(dist(affine(ft, c, zero), big) - c * c * base) <= 1e-9 * std::max(1.0, c * c * base) &&
             std::abs(direct(affine(fs, c, zero), affine(ft, c, zero), big) - direct(fs, ft, s)) <= 1e-9;
  }
  return {exact == n && translation == n && scale == n,
          fmt("N=1 reduction exact %d/%d, translation %d/%d, scale %d/%d", exact, n, translation, n, scale, n)};
}

// ---- 4-6: adaptation --------------------------------------------------------

AdaptationConfig base_config(std::uint64_t seed) {
  AdaptationConfig c;
  c.lambda = 1.0;
  c.steps = 300;
  c.batch_size = 4;
  c.learning_rate = 2e-3;
  c.seed = seed;
  return c;
}

double mean_distance(const MetricSnapshot& snap, const std::string& domain) {
  return -snap.report.semantic_similarity_of(domain);
}

Outcome single_domain(const World& world, const SubspaceBank& bank, std::uint64_t seed, const Thresholds& th) {
  const RunRecord full = run_single_domain(base_config(seed), world, bank, "attr_a");
  AdaptationConfig no_direct = base_config(seed);
  no_direct.lambda = 0.0;
  const RunRecord plain = run_single_domain(no_direct, world, bank, "attr_a");
  const double before = mean_distance(full.first_metrics(), "attr_a");
  const double after = mean_distance(full.final_metrics(), "attr_a");
  const double drop = (before - after) / before;
  const double cons = full.final_metrics().report.consistency;
  const double cons0 = plain.final_metrics().report.consistency;
  return {drop >= th.min_similarity_drop && cons >= cons0,
          fmt("distance %.4g -> %.4g (drop %.1f%%, need >=%.0f%%); consistency %.4f vs lambda=0 %.4f", before, after,
              100.0 * drop, 100.0 * th.min_similarity_drop, cons, cons0)};
}

Outcome hybrid(const World& world, const SubspaceBank& bank, std::uint64_t seed) {
  AdaptationConfig c = base_config(seed);
  c.weights = {{"attr_a", 0.5}, {"attr_b", 0.5}};
  const RunRecord run = run_adaptation(c, world, bank);
  bool ok = true;
  std::string detail;
  for (const auto& w : c.weights) {
    const double before = mean_distance(run.first_metrics(), w.domain_id);
    const double after = mean_distance(run.final_metrics(), w.domain_id);
    ok = ok && after < before;
    detail += fmt("%s%s %.4g -> %.4g", detail.empty() ? "" : ", ", w.domain_id.c_str(), before, after);
  }
  return {ok, detail};
}

Outcome collapse(const World& world, const SubspaceBank& bank, std::uint64_t seed, const Thresholds& th) {
  AdaptationConfig c = base_config(seed);
  c.weights = {{"attr_a", 0.5}, {"attr_b", 0.5}};
  const RunRecord full = run_adaptation(c, world, bank);
  c.dist_only = true;
  const RunRecord dist = run_adaptation(c, world, bank);
  const auto& f = full.final_metrics().report;
  const auto& d = dist.final_metrics().report;
  const double gain = (f.consistency - d.consistency) / std::abs(d.consistency);
  return {d.diversity < f.diversity && d.consistency < f.consistency && gain >= th.min_consistency_gain,
          fmt("diversity dist_only %.4f < full %.4f; consistency dist_only %.4f < full %.4f; gain %.0f%% (need "
              ">=%.0f%%)",
              d.diversity, f.diversity, d.consistency, f.consistency, 100.0 * gain, 100.0 * th.min_consistency_gain)};
}

// ---- 7-8: CLI ---------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HDA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome separation(const World& world, const fs::path& work, const Thresholds& th) {
  std::vector<std::string> ids;
  for (const auto& d : world.spec.domains) ids.push_back(d.id);
  double worst = std::numeric_limits<double>::infinity();
  bool ok = true;
  try {
    for (const auto& e : separability_precheck(world, ids, th.separability_factor)) {
      worst = std::min(worst, e.centroid_distance / e.spread);
    }
  } catch (const SeparabilityError&) {
    ok = false;
  }

  io::save_world(world, work / "world");
  double plane_ratio = 0.0;
  if (run_cli("export-viz --world " + (work / "world").string() + " --out " + (work / "plane.csv").string(),
              work / "viz.log") != 0) {
    return {false, "export-viz failed"};
  }
  const auto points = io::parse_plane_points_csv(io::read_text(work / "plane.csv"));
  std::map<std::string, std::vector<Vector>> groups;
  for (const auto& p : points) groups[p.domain_id].push_back({p.x, p.y});
  std::vector<LabeledFeatures> sets;
  for (auto& [id, pts] : groups) sets.push_back({id, FeatureSet(pts)});
  plane_ratio = std::numeric_limits<double>::infinity();
  for (const auto& e : separability("plane", sets, th.separability_factor)) {
    ok = ok && e.separated;
    plane_ratio = std::min(plane_ratio, e.centroid_distance / e.spread);
  }
  return {ok && worst > th.separability_factor && plane_ratio > th.separability_factor,
          fmt("embedding gap/spread min %.2f over all training encoders; PCA plane %.2f (need >%.0f)", worst,
              plane_ratio, th.separability_factor)};
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  if (fs::is_regular_file(a)) return fs::is_regular_file(b) && io::read_text(a) == io::read_text(b);
  const auto fa = files_under(a), fb = files_under(b);
  if (fa != fb) return false;
  for (const auto& f : fa)
    if (io::read_text(a / f) != io::read_text(b / f)) return false;
  return true;
}

Outcome determinism(const fs::path& work, const fs::path& config) {
  struct Command {
    std::string name;
    std::function<std::string(const fs::path&)> args;
    std::string output;
  };
  const std::string cfg = config.string();
  const std::vector<Command> commands = {
      {"gen-world", [&](const fs::path& d) { return "gen-world --config " + cfg + " --out " + (d / "world").string(); },
       "world"},
      {"build-subspaces",
       [&](const fs::path& d) {
         return "build-subspaces --world " + (d / "world").string() + " --out " + (d / "subspaces").string();
       },
       "subspaces"},
      {"adapt",
       [&](const fs::path& d) {
         return "adapt --config " + cfg + " --world " + (d / "world").string() + " --out " + (d / "run").string();
       },
       "run"},
      {"eval",
       [&](const fs::path& d) { return "eval --run " + (d / "run").string() + " --out " + (d / "eval.json").string(); },
       "eval.json"},
      {"ablate",
       [&](const fs::path& d) {
         return "ablate --config " + cfg + " --world " + (d / "world").string() + " --out " + (d / "ablation").string();
       },
       "ablation"},
      {"export-viz",
       [&](const fs::path& d) {
         return "export-viz --world " + (d / "world").string() + " --out " + (d / "plane.csv").string();
       },
       "plane.csv"},
      {"gradcheck", [&](const fs::path&) { return std::string("gradcheck --full"); }, "gradcheck.log"},
  };
  std::string detail;
  bool ok = true;
  for (const char* rep : {"a", "b"}) {
    const fs::path dir = work / rep;
    fs::create_directories(dir);
    for (const auto& c : commands) {
      const fs::path log = dir / (c.name == "gradcheck" ? "gradcheck.log" : c.name + ".log");
      if (run_cli(c.args(dir), log) != 0) return {false, c.name + " exited non-zero"};
    }
  }
  for (const auto& c : commands) {
    const bool same = same_bytes(work / "a" / c.output, work / "b" / c.output);
    ok = ok && same;
    if (!same) detail += (detail.empty() ? "" : ", ") + c.name;
  }
  return {ok, ok ? fmt("%zu commands run twice, outputs byte-identical", commands.size())
                 : "outputs differ: " + detail};
}

// ---- driver -----------------------------------------------------------------

bool report(int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o = fn();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || secs < limit_s;
  const bool ok = o.passed && in_time;
  std::printf("[%s] C%d %-26s %s (%.2fs%s)\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              limit_s > 0.0 ? fmt(", limit %.0fs", limit_s).c_str() : "");
  std::fflush(stdout);
  return ok;
}

void sweep(std::size_t seeds, const Thresholds& th) {
  std::printf("\nseed  C4 drop   C4 cons  C4 cons(l=0)  C5 attr_a        C5 attr_b        C6 gain  C4 C5 C6\n");
  int c4 = 0, c5 = 0, c6 = 0;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const World world = build_world(default_world_spec(2, s));
    const SubspaceBank bank = build_subspace_bank(world);
    const RunRecord single = run_single_domain(base_config(s), world, bank, "attr_a");
    AdaptationConfig zero = base_config(s);
    zero.lambda = 0.0;
    const RunRecord plain = run_single_domain(zero, world, bank, "attr_a");
    AdaptationConfig c = base_config(s);
    c.weights = {{"attr_a", 0.5}, {"attr_b", 0.5}};
    const RunRecord full = run_adaptation(c, world, bank);
    c.dist_only = true;
    const RunRecord dist = run_adaptation(c, world, bank);

    const double b4 = mean_distance(single.first_metrics(), "attr_a");
    const double drop = (b4 - mean_distance(single.final_metrics(), "attr_a")) / b4;
    const double cons = single.final_metrics().report.consistency;
    const double cons0 = plain.final_metrics().report.consistency;
    const bool p4 = drop >= th.min_similarity_drop && cons >= cons0;
    bool p5 = true;
    std::string c5s;
    for (const char* d : {"attr_a", "attr_b"}) {
      const double before = mean_distance(full.first_metrics(), d), after = mean_distance(full.final_metrics(), d);
      p5 = p5 && after < before;
      c5s += fmt("%6.2f->%6.2f  ", before, after);
    }
    const auto& f = full.final_metrics().report;
    const auto& dd = dist.final_metrics().report;
    const double gain = (f.consistency - dd.consistency) / std::abs(dd.consistency);
    const bool p6 = dd.diversity < f.diversity && dd.consistency < f.consistency && gain >= th.min_consistency_gain;
    c4 += p4;
    c5 += p5;
    c6 += p6;
    std::printf("%4llu  %6.1f%%  %7.4f  %12.4f  %s %6.0f%%  %s  %s  %s\n", static_cast<unsigned long long>(s),
                100.0 * drop, cons, cons0, c5s.c_str(), 100.0 * gain, p4 ? "ok" : "--", p5 ? "ok" : "--",
                p6 ? "ok" : "--");
  }
  std::printf("passing seeds: C4 %d/%zu, C5 %d/%zu, C6 %d/%zu\n", c4, seeds, c5, seeds, c6, seeds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::size_t sweep_seeds = 0;
  std::string work_dir = (fs::temp_directory_path() / "hda_acceptance").string();
  std::string thresholds_path = std::string(HDA_CONFIG_DIR) + "/acceptance.json";
  app.add_option("--sweep", sweep_seeds, "Also tabulate criteria 4-6 over world/run seeds 1..N");
  app.add_option("--work-dir", work_dir, "Scratch directory for CLI outputs");
  app.add_option("--thresholds", thresholds_path, "Threshold file");
  CLI11_PARSE(app, argc, argv);

  const Thresholds th = load_thresholds(thresholds_path);
  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path config = fs::path(HDA_CONFIG_DIR) / "default.json";

  const World world = build_world(default_world_spec(2, 7));
  const SubspaceBank bank = build_subspace_bank(world);

  bool all = true;
  all &= report(1, "projection oracle", 10.0, projection_oracle);
  all &= report(2, "gradient correctness", 30.0, gradient_check);
  all &= report(3, "reduction identities", 0.0, reduction_identities);
  all &= report(4, "single-domain adaptation", 60.0, [&] { return single_domain(world, bank, 7, th); });
  all &= report(5, "hybrid adaptation", 90.0, [&] { return hybrid(world, bank, 7); });
  all &= report(6, "model-collapse ablation", 0.0, [&] { return collapse(world, bank, 7, th); });
  all &= report(7, "separability", 0.0, [&] { return separation(world, work / "c7", th); });
  all &= report(8, "determinism", 0.0, [&] { return determinism(work / "c8", config); });
  std::printf("%s\n", all ? "all criteria passed" : "some criteria failed");

  if (sweep_seeds > 0) sweep(sweep_seeds, th);
  return all ? 0 : 1;
}
