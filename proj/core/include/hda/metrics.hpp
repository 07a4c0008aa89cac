#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hda/subspace.hpp"
#include "hda/world.hpp"

namespace hda {

/// Evaluation view of one target domain under the held-out encoder.
struct HeldOutDomain {
  std::string domain_id;
  std::reference_wrapper<const DomainSubspace> subspace;
  /// Held-out embeddings of the domain's references.
  std::vector<EmbeddingVector> references;
};

struct DomainScore {
  std::string domain_id;
  /// Negative mean squared subspace distance; closer to 0 is better.
  double semantic_similarity = 0.0;
};

struct MetricsReport {
  std::vector<DomainScore> semantic_similarity;
  /// Mean paired cosine between held-out embeddings of G_S(z) and G_T(z),
  /// each centered on its own sample mean; rounding-level centered vectors
  /// (a collapsed generator) count as cosine 0.
  double consistency = 0.0;
  /// Mean intra-cluster pairwise embedding distance, clusters formed by
  /// nearest-reference assignment.
  double diversity = 0.0;
  std::size_t n_samples = 0;

  double semantic_similarity_of(const std::string& domain_id) const;
  double worst_semantic_similarity() const;
};

/// Throws ConfigError for n_samples < 2, an empty domain list, or a held-out
/// encoder id that appears among `training_encoder_ids`.
MetricsReport evaluate(const GeneratorParams& target, const GeneratorParams& source, const Encoder& held_out,
                       const std::vector<HeldOutDomain>& domains, std::size_t n_samples, std::uint64_t seed,
                       const std::set<std::string>& training_encoder_ids = {});

/// Held-out views for the given domains of a world and its subspace bank.
std::vector<HeldOutDomain> held_out_domains(const World& world, const SubspaceBank& bank,
                                            const std::vector<std::string>& domain_ids);

/// Cosine similarity of two equal-length vectors; 0 if either is zero.
double cosine(std::span<const double> a, std::span<const double> b);

/// Intra-cluster diversity of `samples` against `references`.
double intra_cluster_diversity(const std::vector<EmbeddingVector>& samples,
                               const std::vector<EmbeddingVector>& references);

}  // namespace hda
