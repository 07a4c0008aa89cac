#include "hda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hda/errors.hpp"

namespace hda {

namespace {

constexpr double kCenteredFloor = 1e-12;

Vector mean_of(const std::vector<EmbeddingVector>& xs) {
  Vector m(xs.front().size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += x[i];
  for (double& v : m) v /= static_cast<double>(xs.size());
  return m;
}

}  // namespace

double MetricsReport::semantic_similarity_of(const std::string& domain_id) const {
  for (const auto& s : semantic_similarity)
    if (s.domain_id == domain_id) return s.semantic_similarity;
  throw ConfigError("report has no domain '" + domain_id + "'");
}

double MetricsReport::worst_semantic_similarity() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : semantic_similarity) worst = std::min(worst, s.semantic_similarity);
  return worst;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double denom = std::sqrt(squared_norm(a) * squared_norm(b));
  if (denom == 0.0) return 0.0;
  return std::clamp(dot(a, b) / denom, -1.0, 1.0);
}

double intra_cluster_diversity(const std::vector<EmbeddingVector>& samples,
                               const std::vector<EmbeddingVector>& references) {
  if (references.empty()) throw ConfigError("diversity needs at least one reference");
  std::vector<std::vector<std::size_t>> clusters(references.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < references.size(); ++r) {
      const double d = squared_norm(subtract(samples[s], references[r]));
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    clusters[best].push_back(s);
  }
  double acc = 0.0;
  std::size_t counted = 0;
  for (const auto& members : clusters) {
    if (members.size() < 2) continue;
    double pair_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        pair_sum += std::sqrt(squared_norm(subtract(samples[members[a]], samples[members[b]])));
        ++pairs;
      }
    acc += pair_sum / static_cast<double>(pairs);
    ++counted;
  }
  return counted == 0 ? 0.0 : acc / static_cast<double>(counted);
}

MetricsReport evaluate(const GeneratorParams& target, const GeneratorParams& source, const Encoder& held_out,
                       const std::vector<HeldOutDomain>& domains, std::size_t n_samples, std::uint64_t seed,
                       const std::set<std::string>& training_encoder_ids) {
  if (n_samples < 2) throw ConfigError("evaluation needs at least 2 samples");
  if (domains.empty()) throw ConfigError("evaluation needs at least one domain");
  if (training_encoder_ids.count(held_out.id()) != 0) {
    throw ConfigError("held-out encoder '" + held_out.id() + "' is also a training encoder");
  }

  const auto latents = sample_latents(source.dims().latent, n_samples, seed);
  std::vector<EmbeddingVector> f_s;
  std::vector<EmbeddingVector> f_t;
  f_s.reserve(n_samples);
  f_t.reserve(n_samples);
  for (const auto& z : latents) {
    f_s.push_back(held_out.encode(source.forward(z)));
    f_t.push_back(held_out.encode(target.forward(z)));
  }

  MetricsReport report;
  report.n_samples = n_samples;
  for (const auto& d : domains) {
    double acc = 0.0;
    for (const auto& f : f_t) acc += subspace_distance_sq(d.subspace.get(), f);
    report.semantic_similarity.push_back({d.domain_id, -acc / static_cast<double>(n_samples)});
  }

  const Vector mean_s = mean_of(f_s);
  const Vector mean_t = mean_of(f_t);
  // A centered embedding at rounding level (a collapsed generator) has no
  // direction; count it as zero rather than normalizing the noise.
  const auto centered = [](const EmbeddingVector& f, const Vector& mean) {
    Vector c = subtract(f, mean);
    if (squared_norm(c) <= kCenteredFloor * kCenteredFloor * (1.0 + squared_norm(mean))) std::fill(c.begin(), c.end(), 0.0);
    return c;
  };
  double cos_acc = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    cos_acc += cosine(centered(f_s[i], mean_s), centered(f_t[i], mean_t));
  }
  report.consistency = cos_acc / static_cast<double>(n_samples);

  std::vector<EmbeddingVector> refs;
  for (const auto& d : domains) refs.insert(refs.end(), d.references.begin(), d.references.end());
  report.diversity = intra_cluster_diversity(f_t, refs);
  return report;
}

std::vector<HeldOutDomain> held_out_domains(const World& world, const SubspaceBank& bank,
                                            const std::vector<std::string>& domain_ids) {
  std::vector<HeldOutDomain> out;
  const std::string& enc = world.held_out_encoder.id();
  for (const auto& id : domain_ids) {
    auto it = bank.features.find({enc, id});
    std::vector<EmbeddingVector> refs =
        it != bank.features.end() ? it->second.features()
                                  : encode_features(world.held_out_encoder, world.references.at(id)).features();
    out.push_back({id, std::cref(bank.at(enc, id)), std::move(refs)});
  }
  return out;
}

}  // namespace hda
