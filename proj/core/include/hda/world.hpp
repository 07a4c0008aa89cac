#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hda/autodiff.hpp"
#include "hda/linalg.hpp"
#include "hda/subspace.hpp"

namespace hda {

/// splitmix64 mix of a base seed and a stream index; used to give every
/// stochastic call its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// n standard-normal vectors of length `dim`, a pure function of `seed`.
std::vector<Vector> sample_latents(std::size_t dim, std::size_t n, std::uint64_t seed);

struct GeneratorDims {
  std::size_t latent = 8;
  std::size_t hidden = 32;
  std::size_t output = 32;

  bool operator==(const GeneratorDims&) const = default;
};

enum class Mutability { Frozen, Trainable };

/// Two-layer perceptron z -> tanh(W1 z + b1) -> W2 h + b2. Biases are stored
/// as column matrices. The flat layout used by the optimizer is w1, b1, w2, b2
/// in row-major order.
class GeneratorParams {
 public:
  GeneratorParams(GeneratorDims dims, Matrix w1, Matrix b1, Matrix w2, Matrix b2, Mutability mutability);

  const GeneratorDims& dims() const { return dims_; }
  const Matrix& w1() const { return w1_; }
  const Matrix& b1() const { return b1_; }
  const Matrix& w2() const { return w2_; }
  const Matrix& b2() const { return b2_; }
  Mutability mutability() const { return mutability_; }
  bool trainable() const { return mutability_ == Mutability::Trainable; }

  std::size_t parameter_count() const;
  Vector flatten() const;
  /// Throws ConfigError on a frozen generator, DimensionError on a length
  /// mismatch and NumericalError on non-finite input.
  void assign_flat(std::span<const double> flat);

  Vector forward(std::span<const double> z) const;

  bool operator==(const GeneratorParams&) const = default;

 private:
  GeneratorDims dims_;
  Matrix w1_, b1_, w2_, b2_;
  Mutability mutability_;
};

/// Tape handles for a generator's parameters, sliced out of one flat leaf.
struct GeneratorVars {
  ad::Var w1, b1, w2, b2;
};

GeneratorVars bind_generator(const GeneratorDims& dims, ad::Var flat);
ad::Var generator_forward(const GeneratorVars& g, ad::Var z);

/// Each row of the output-layer weights is rescaled to L2 norm `output_scale`.
GeneratorParams make_source_generator(std::uint64_t seed, const GeneratorDims& dims = {},
                                      double output_scale = 0.5);
/// Deep copy of `source`, marked trainable.
GeneratorParams make_target_generator(const GeneratorParams& source);

struct EncoderSpec {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t input_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 16;
  /// Only the first `attended_dims` input coordinates reach the hidden layer;
  /// every encoder in a world shares this set, the rest of x is nuisance.
  std::size_t attended_dims = 16;

  bool operator==(const EncoderSpec&) const = default;
};

/// Hidden biases are large next to the attended pre-activations, so most relu
/// units keep their on/off state across domains and the map is mildly nonlinear.
inline constexpr double kEncoderHiddenBiasStd = 6.0;
/// Output weights have std kEncoderOutputGain / sqrt(hidden).
inline constexpr double kEncoderOutputGain = 2.0;

/// Frozen map x -> W2 relu(W1 x + b1) + b2, reproducible from (seed, dims).
class Encoder {
 public:
  explicit Encoder(EncoderSpec spec);

  const EncoderSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  std::size_t output_dim() const { return spec_.output_dim; }

  EmbeddingVector encode(std::span<const double> x) const;
  ad::Var encode(ad::Tape& tape, ad::Var x) const;

  bool operator==(const Encoder&) const = default;

 private:
  EncoderSpec spec_;
  Matrix w1_, b1_, w2_, b2_;
};

struct SyntheticDomainSpec {
  std::string id;
  Vector attribute_shift;
  std::optional<Matrix> attribute_transform;
  double noise_scale = 0.2;
  std::size_t k = 10;

  bool operator==(const SyntheticDomainSpec&) const = default;
};

/// k references x_j = T(G_S(z_j)) + shift + noise * n_j. The latents z_j are
/// exactly sample_latents(d_z, k, seed); noise uses a separate stream.
std::vector<Vector> sample_domain_references(const GeneratorParams& source, const SyntheticDomainSpec& domain,
                                             std::uint64_t seed, bool allow_point_subspace = false);

struct WorldSpec {
  std::uint64_t seed = 7;
  GeneratorDims generator;
  double generator_output_scale = 0.5;
  std::vector<EncoderSpec> training_encoders;
  EncoderSpec held_out_encoder;
  std::vector<SyntheticDomainSpec> domains;

  bool operator==(const WorldSpec&) const = default;
};

/// Default world: shifts 5*e_1, 5*e_2 (, 5*e_3) with noise 0.2 and k = 10,
/// three training encoders and one held-out encoder.
WorldSpec default_world_spec(std::size_t num_domains = 2, std::uint64_t seed = 7);

/// Validates dims, disjoint encoder ids and domain specs. Throws ConfigError.
void validate(const WorldSpec& spec);

struct World {
  WorldSpec spec;
  GeneratorParams source;
  std::vector<Encoder> training_encoders;
  Encoder held_out_encoder;
  /// domain id -> reference x-vectors
  std::map<std::string, std::vector<Vector>> references;

  const SyntheticDomainSpec& domain(const std::string& id) const;
  const Encoder& encoder(const std::string& id) const;
};

/// Builds the source generator and encoders from the spec and samples every
/// domain's references from its own derived stream.
World build_world(const WorldSpec& spec);
/// Same, with references supplied (e.g. read back from CSV).
World assemble_world(const WorldSpec& spec, std::map<std::string, std::vector<Vector>> references);

/// Encodes every domain's references under one encoder.
FeatureSet encode_features(const Encoder& encoder, const std::vector<Vector>& xs);

using SubspaceKey = std::pair<std::string, std::string>;  // (encoder id, domain id)

struct SubspaceBank {
  std::map<SubspaceKey, FeatureSet> features;
  std::map<SubspaceKey, DomainSubspace> subspaces;

  const DomainSubspace& at(const std::string& encoder_id, const std::string& domain_id) const;
};

/// One subspace per (encoder, domain), for training and held-out encoders.
SubspaceBank build_subspace_bank(const World& world, const SubspaceOptions& options = {});

struct SeparabilityEntry {
  std::string encoder_id;
  std::string first;
  std::string second;
  double centroid_distance = 0.0;
  double spread = 0.0;  // larger of the two sets' RMS distance to their centroid
  bool separated = false;
};

/// RMS distance of the features to their mean.
double intra_set_spread(const FeatureSet& set);

/// Pairwise check over the given sets: centroid distance > factor * spread.
std::vector<SeparabilityEntry> separability(const std::string& encoder_id,
                                            const std::vector<LabeledFeatures>& sets, double factor = 3.0);

/// Checks every pair of target domains under every training encoder. Throws
/// SeparabilityError naming the first failing pair.
std::vector<SeparabilityEntry> separability_precheck(const World& world,
                                                     const std::vector<std::string>& domain_ids,
                                                     double factor = 3.0);

}  // namespace hda
