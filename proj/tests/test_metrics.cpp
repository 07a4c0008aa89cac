#include <doctest.h>

#include "hda/ablation.hpp"
#include "hda/errors.hpp"
#include "hda/metrics.hpp"
#include "oracles.hpp"

using namespace hda;

namespace {

struct Fixture {
  World world = build_world(default_world_spec());
  SubspaceBank bank = build_subspace_bank(world);
  std::vector<HeldOutDomain> domains = held_out_domains(world, bank, {"attr_a", "attr_b"});
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

GeneratorParams constant_generator(const GeneratorDims& dims, double value) {
  return GeneratorParams(dims, Matrix(dims.hidden, dims.latent), Matrix(dims.hidden, 1), Matrix(dims.output, dims.hidden),
                         Matrix(dims.output, 1, value), Mutability::Trainable);
}

GeneratorParams perturbed(const GeneratorParams& g, double scale, std::uint64_t seed) {
  GeneratorParams out = make_target_generator(g);
  std::mt19937_64 rng(seed);
  out.assign_flat(add(out.flatten(), oracle::random_vector(out.parameter_count(), rng, scale)));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("an unadapted target has consistency 1 and the source's similarity") {
    const auto& f = fixture();
    const GeneratorParams target = make_target_generator(f.world.source);
    const MetricsReport r = evaluate(target, f.world.source, f.world.held_out_encoder, f.domains, 200, 5);
    CHECK(r.consistency == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.n_samples == 200);
    const MetricsReport base = evaluate(f.world.source, f.world.source, f.world.held_out_encoder, f.domains, 200, 5);
    CHECK(r.semantic_similarity_of("attr_a") == base.semantic_similarity_of("attr_a"));
    CHECK(r.diversity == base.diversity);
    CHECK(r.worst_semantic_similarity() ==
          std::min(r.semantic_similarity_of("attr_a"), r.semantic_similarity_of("attr_b")));
    CHECK_THROWS_AS(r.semantic_similarity_of("attr_z"), ConfigError);
  }

  TEST_CASE("metric values against an independent recomputation") {
    const auto& f = fixture();
    const GeneratorParams target = perturbed(f.world.source, 0.05, 3);
    const std::size_t n = 64;
    const MetricsReport r = evaluate(target, f.world.source, f.world.held_out_encoder, f.domains, n, 11);

    const auto z = sample_latents(8, n, 11);
    Eigen::MatrixXd s(16, n), t(16, n);
    for (std::size_t i = 0; i < n; ++i) {
      s.col(i) = oracle::to_eigen(f.world.held_out_encoder.encode(f.world.source.forward(z[i])));
      t.col(i) = oracle::to_eigen(f.world.held_out_encoder.encode(target.forward(z[i])));
    }
    const Eigen::MatrixXd sc = s.colwise() - s.rowwise().mean();
    const Eigen::MatrixXd tc = t.colwise() - t.rowwise().mean();
    double cos_acc = 0.0;
    for (Eigen::Index i = 0; i < sc.cols(); ++i) cos_acc += sc.col(i).dot(tc.col(i)) / (sc.col(i).norm() * tc.col(i).norm());
    CHECK(r.consistency == doctest::Approx(cos_acc / double(n)).epsilon(1e-12));

    for (const auto& d : f.domains) {
      const auto& refs = f.bank.features.at({"heldout", d.domain_id}).features();
      // Projector with an explicit relative cutoff: a rank-revealing solve at
      // machine-epsilon threshold keeps the rounding-level direction that
      // centering k points leaves behind.
      const Eigen::MatrixXd p = oracle::scatter_projector(refs);
      const Eigen::VectorXd mean = oracle::mean_of(refs);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < t.cols(); ++i) {
        const Eigen::VectorXd r = t.col(i) - mean;
        acc += (r - p * r).squaredNorm();
      }
      CHECK(r.semantic_similarity_of(d.domain_id) == doctest::Approx(-acc / double(n)).epsilon(1e-9));
    }
  }

  TEST_CASE("intra-cluster diversity on a hand-built example") {
    const std::vector<EmbeddingVector> refs{{0.0, 0.0}, {10.0, 0.0}};
    const std::vector<EmbeddingVector> samples{{0.0, 1.0}, {0.0, -1.0}, {10.0, 0.0}, {13.0, 4.0}, {9.0, 0.0}};
    // Cluster 0: one pair at distance 2. Cluster 1: pairs 5, 1 and sqrt(32).
    const double expected = (2.0 + (5.0 + 1.0 + std::sqrt(32.0)) / 3.0) / 2.0;
    CHECK(intra_cluster_diversity(samples, refs) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(intra_cluster_diversity({{1.0, 1.0}}, refs) == 0.0);
    CHECK_THROWS_AS(intra_cluster_diversity(samples, {}), ConfigError);
  }

  TEST_CASE("a constant generator has zero diversity and zero consistency") {
    const auto& f = fixture();
    const GeneratorParams flat = constant_generator(f.world.source.dims(), 0.3);
    const MetricsReport r = evaluate(flat, f.world.source, f.world.held_out_encoder, f.domains, 100, 2);
    CHECK(r.diversity == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(std::abs(r.consistency) <= 1e-12);
  }

  TEST_CASE("cosine") {
    CHECK(cosine(Vector{1.0, 0.0}, Vector{0.0, 2.0}) == 0.0);
    CHECK(cosine(Vector{1.0, 1.0}, Vector{2.0, 2.0}) == doctest::Approx(1.0));
    CHECK(cosine(Vector{0.0, 0.0}, Vector{1.0, 0.0}) == 0.0);
  }

  TEST_CASE("evaluation is deterministic in its seed") {
    const auto& f = fixture();
    const GeneratorParams target = perturbed(f.world.source, 0.05, 4);
    const auto a = evaluate(target, f.world.source, f.world.held_out_encoder, f.domains, 128, 9);
    const auto b = evaluate(target, f.world.source, f.world.held_out_encoder, f.domains, 128, 9);
    const auto c = evaluate(target, f.world.source, f.world.held_out_encoder, f.domains, 128, 10);
    CHECK(a.consistency == b.consistency);
    CHECK(a.diversity == b.diversity);
    CHECK(a.semantic_similarity_of("attr_b") == b.semantic_similarity_of("attr_b"));
    CHECK(a.consistency != c.consistency);
  }

  TEST_CASE("invalid evaluations") {
    const auto& f = fixture();
    const auto& g = f.world.source;
    const auto& h = f.world.held_out_encoder;
    CHECK_THROWS_AS(evaluate(g, g, h, f.domains, 1, 0), ConfigError);
    CHECK_THROWS_AS(evaluate(g, g, h, {}, 10, 0), ConfigError);
    CHECK_THROWS_AS(evaluate(g, g, h, f.domains, 10, 0, {"enc0", "heldout"}), ConfigError);
    CHECK_NOTHROW(evaluate(g, g, h, f.domains, 10, 0, {"enc0", "enc1"}));
  }
}

TEST_SUITE("ablation") {
  TEST_CASE("the direction term and the encoder ensemble") {
    const auto& f = fixture();
    AdaptationConfig base;
    base.seed = 7;
    const AblationTable table = ablation_suite(base, f.world, f.bank);
    CHECK(table.rows.size() == 6);
    const auto& full = table.row("full", "ensemble");
    const auto& dist = table.row("dist_only", "ensemble");
    CHECK(full.report.consistency > dist.report.consistency);
    CHECK(full.report.diversity > dist.report.diversity);
    CHECK(table.row("full", "single").encoder_ids == std::vector<std::string>{"enc0"});
    CHECK(full.encoder_ids.size() == 3);
    CHECK_THROWS_AS(table.row("full", "pair"), ConfigError);

    const double ens = full.report.worst_semantic_similarity();
    const double single = table.row("full", "single").report.worst_semantic_similarity();
    MESSAGE("worst-domain similarity: ensemble " << ens << ", single " << single);
    for (const auto& r : table.rows) {
      MESSAGE(r.loss << "/" << r.encoders << ": consistency " << r.report.consistency << ", diversity "
                     << r.report.diversity << ", worst similarity " << r.report.worst_semantic_similarity());
    }
  }
}
