#include "hda/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hda/errors.hpp"

namespace hda {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Matrix gaussian_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

void check_dims(const GeneratorDims& d) {
  if (d.latent == 0 || d.hidden == 0 || d.output == 0) throw ConfigError("generator dims must be positive");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x5851F42D4C957F2DULL));
}

std::vector<Vector> sample_latents(std::size_t dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& z : out)
    for (double& v : z) v = normal(rng);
  return out;
}

GeneratorParams::GeneratorParams(GeneratorDims dims, Matrix w1, Matrix b1, Matrix w2, Matrix b2,
                                 Mutability mutability)
    : dims_(dims), w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)),
      mutability_(mutability) {
  check_dims(dims_);
  if (w1_.rows() != dims_.hidden || w1_.cols() != dims_.latent || b1_.rows() != dims_.hidden ||
      b1_.cols() != 1 || w2_.rows() != dims_.output || w2_.cols() != dims_.hidden ||
      b2_.rows() != dims_.output || b2_.cols() != 1) {
    throw DimensionError("generator parameter shapes do not match declared dims");
  }
  for (const Matrix* m : {&w1_, &b1_, &w2_, &b2_})
    if (!all_finite(m->values())) throw NumericalError("generator parameters must be finite");
}

std::size_t GeneratorParams::parameter_count() const {
  return w1_.size() + b1_.size() + w2_.size() + b2_.size();
}

Vector GeneratorParams::flatten() const {
  Vector flat;
  flat.reserve(parameter_count());
  for (const Matrix* m : {&w1_, &b1_, &w2_, &b2_})
    flat.insert(flat.end(), m->values().begin(), m->values().end());
  return flat;
}

void GeneratorParams::assign_flat(std::span<const double> flat) {
  if (!trainable()) throw ConfigError("attempt to modify a frozen generator");
  if (flat.size() != parameter_count()) throw DimensionError("flat parameter vector has wrong length");
  if (!all_finite(flat)) throw NumericalError("non-finite generator parameter update");
  std::size_t offset = 0;
  for (Matrix* m : {&w1_, &b1_, &w2_, &b2_}) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), m->size(), m->values().begin());
    offset += m->size();
  }
}

Vector GeneratorParams::forward(std::span<const double> z) const {
  if (z.size() != dims_.latent) throw DimensionError("generator: latent has wrong length");
  Vector h = add(matvec(w1_, z), b1_.values());
  for (double& v : h) v = std::tanh(v);
  return add(matvec(w2_, h), b2_.values());
}

GeneratorVars bind_generator(const GeneratorDims& dims, ad::Var flat) {
  std::size_t offset = 0;
  auto take = [&](std::size_t rows, std::size_t cols) {
    ad::Var v = ad::slice(flat, offset, rows, cols);
    offset += rows * cols;
    return v;
  };
  GeneratorVars g;
  g.w1 = take(dims.hidden, dims.latent);
  g.b1 = take(dims.hidden, 1);
  g.w2 = take(dims.output, dims.hidden);
  g.b2 = take(dims.output, 1);
  if (offset != flat.value().size()) throw DimensionError("flat generator leaf has wrong length");
  return g;
}

ad::Var generator_forward(const GeneratorVars& g, ad::Var z) {
  ad::Var h = ad::tanh(ad::matvec(g.w1, z) + g.b1);
  return ad::matvec(g.w2, h) + g.b2;
}

GeneratorParams make_source_generator(std::uint64_t seed, const GeneratorDims& dims, double output_scale) {
  check_dims(dims);
  if (!(output_scale > 0.0)) throw ConfigError("generator output scale must be positive");
  std::mt19937_64 rng(seed);
  Matrix w1 = gaussian_matrix(rng, dims.hidden, dims.latent, 1.0 / std::sqrt(static_cast<double>(dims.latent)));
  // Unit-scale hidden biases give every tanh unit a nonzero mean, so moving w2
  // shifts the whole output distribution rather than only its spread.
  Matrix b1 = gaussian_matrix(rng, dims.hidden, 1, 1.0);
  Matrix w2 = gaussian_matrix(rng, dims.output, dims.hidden, 1.0);
  for (std::size_t r = 0; r < dims.output; ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < dims.hidden; ++c) norm += w2(r, c) * w2(r, c);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < dims.hidden; ++c) w2(r, c) *= output_scale / norm;
  }
  Matrix b2 = gaussian_matrix(rng, dims.output, 1, 0.1);
  return GeneratorParams(dims, std::move(w1), std::move(b1), std::move(w2), std::move(b2), Mutability::Frozen);
}

GeneratorParams make_target_generator(const GeneratorParams& source) {
  return GeneratorParams(source.dims(), source.w1(), source.b1(), source.w2(), source.b2(), Mutability::Trainable);
}

Encoder::Encoder(EncoderSpec spec) : spec_(std::move(spec)) {
  if (spec_.id.empty()) throw ConfigError("encoder id must be non-empty");
  if (spec_.input_dim == 0 || spec_.hidden_dim == 0 || spec_.output_dim == 0 || spec_.attended_dims == 0) {
    throw ConfigError("encoder '" + spec_.id + "' has a zero dimension");
  }
  if (spec_.attended_dims > spec_.input_dim) {
    throw ConfigError("encoder '" + spec_.id + "': attended_dims exceeds input_dim");
  }
  std::mt19937_64 rng(spec_.seed);
  w1_ = gaussian_matrix(rng, spec_.hidden_dim, spec_.input_dim,
                        std::sqrt(2.0 / static_cast<double>(spec_.input_dim)));
  for (std::size_t r = 0; r < spec_.hidden_dim; ++r)
    for (std::size_t c = spec_.attended_dims; c < spec_.input_dim; ++c) w1_(r, c) = 0.0;
  b1_ = gaussian_matrix(rng, spec_.hidden_dim, 1, kEncoderHiddenBiasStd);
  w2_ = gaussian_matrix(rng, spec_.output_dim, spec_.hidden_dim,
                        kEncoderOutputGain / std::sqrt(static_cast<double>(spec_.hidden_dim)));
  b2_ = gaussian_matrix(rng, spec_.output_dim, 1, 0.1);
}

EmbeddingVector Encoder::encode(std::span<const double> x) const {
  if (x.size() != spec_.input_dim) {
    throw DimensionError("encoder '" + spec_.id + "': input has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(spec_.input_dim));
  }
  Vector h = add(matvec(w1_, x), b1_.values());
  for (double& v : h) v = v > 0.0 ? v : 0.0;
  return add(matvec(w2_, h), b2_.values());
}

ad::Var Encoder::encode(ad::Tape& tape, ad::Var x) const {
  if (x.rows() != spec_.input_dim || x.cols() != 1) {
    throw DimensionError("encoder '" + spec_.id + "': tape input has wrong shape");
  }
  ad::Var h = ad::relu(ad::matvec(tape.constant(w1_), x) + tape.constant(b1_));
  return ad::matvec(tape.constant(w2_), h) + tape.constant(b2_);
}

std::vector<Vector> sample_domain_references(const GeneratorParams& source, const SyntheticDomainSpec& domain,
                                             std::uint64_t seed, bool allow_point_subspace) {
  const std::size_t d_x = source.dims().output;
  if (domain.k < (allow_point_subspace ? 1u : 2u)) {
    throw ConfigError("domain '" + domain.id + "' needs k >= 2 references");
  }
  if (!(domain.noise_scale >= 0.0)) throw ConfigError("domain '" + domain.id + "' has negative noise_scale");
  if (domain.attribute_shift.size() != d_x) throw DimensionError("domain '" + domain.id + "': shift length != d_x");
  if (domain.attribute_transform &&
      (domain.attribute_transform->rows() != d_x || domain.attribute_transform->cols() != d_x)) {
    throw DimensionError("domain '" + domain.id + "': transform must be d_x x d_x");
  }

  const auto latents = sample_latents(source.dims().latent, domain.k, seed);
  std::mt19937_64 noise_rng(derive_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(domain.k);
  for (const auto& z : latents) {
    Vector x = source.forward(z);
    if (domain.attribute_transform) x = matvec(*domain.attribute_transform, x);
    for (std::size_t i = 0; i < d_x; ++i) x[i] += domain.attribute_shift[i];
    if (domain.noise_scale > 0.0)
      for (double& v : x) v += domain.noise_scale * normal(noise_rng);
    out.push_back(std::move(x));
  }
  return out;
}

WorldSpec default_world_spec(std::size_t num_domains, std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  for (std::size_t e = 0; e < 3; ++e) {
    spec.training_encoders.push_back({"enc" + std::to_string(e), derive_seed(seed, 100 + e), 32, 64, 16, 16});
  }
  spec.held_out_encoder = {"heldout", derive_seed(seed, 199), 32, 64, 16, 16};
  static const char* kNames[] = {"attr_a", "attr_b", "attr_c", "attr_d"};
  if (num_domains == 0 || num_domains > 4) throw ConfigError("default world supports 1 to 4 domains");
  for (std::size_t i = 0; i < num_domains; ++i) {
    SyntheticDomainSpec d;
    d.id = kNames[i];
    d.attribute_shift.assign(spec.generator.output, 0.0);
    d.attribute_shift[i] = 5.0;
    spec.domains.push_back(std::move(d));
  }
  return spec;
}

void validate(const WorldSpec& spec) {
  check_dims(spec.generator);
  if (!(spec.generator_output_scale > 0.0)) throw ConfigError("generator_output_scale must be positive");
  if (spec.training_encoders.empty()) throw ConfigError("world needs at least one training encoder");
  std::set<std::string> ids;
  for (const auto& e : spec.training_encoders) {
    if (!ids.insert(e.id).second) throw ConfigError("duplicate encoder id '" + e.id + "'");
    if (e.input_dim != spec.generator.output) throw DimensionError("encoder '" + e.id + "' input_dim != d_x");
  }
  if (ids.count(spec.held_out_encoder.id) != 0) {
    throw ConfigError("held-out encoder id '" + spec.held_out_encoder.id + "' collides with a training encoder");
  }
  if (spec.held_out_encoder.input_dim != spec.generator.output) {
    throw DimensionError("held-out encoder input_dim != d_x");
  }
  if (spec.domains.empty()) throw ConfigError("world needs at least one domain");
  std::set<std::string> domain_ids;
  for (const auto& d : spec.domains) {
    if (d.id.empty() || !domain_ids.insert(d.id).second) throw ConfigError("domain ids must be unique and non-empty");
  }
}

const SyntheticDomainSpec& World::domain(const std::string& id) const {
  for (const auto& d : spec.domains)
    if (d.id == id) return d;
  throw ConfigError("unknown domain '" + id + "'");
}

const Encoder& World::encoder(const std::string& id) const {
  for (const auto& e : training_encoders)
    if (e.id() == id) return e;
  if (held_out_encoder.id() == id) return held_out_encoder;
  throw ConfigError("unknown encoder '" + id + "'");
}

World assemble_world(const WorldSpec& spec, std::map<std::string, std::vector<Vector>> references) {
  validate(spec);
  std::vector<Encoder> training;
  for (const auto& e : spec.training_encoders) training.emplace_back(e);
  World world{spec, make_source_generator(spec.seed, spec.generator, spec.generator_output_scale),
              std::move(training), Encoder(spec.held_out_encoder), std::move(references)};
  for (const auto& d : spec.domains) {
    auto it = world.references.find(d.id);
    if (it == world.references.end()) throw IoError("missing references for domain '" + d.id + "'");
    for (const auto& x : it->second)
      if (x.size() != spec.generator.output) throw DimensionError("reference for '" + d.id + "' has wrong length");
  }
  return world;
}

World build_world(const WorldSpec& spec) {
  validate(spec);
  const GeneratorParams source = make_source_generator(spec.seed, spec.generator, spec.generator_output_scale);
  std::map<std::string, std::vector<Vector>> refs;
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    refs[spec.domains[i].id] = sample_domain_references(source, spec.domains[i], derive_seed(spec.seed, 1000 + i));
  }
  return assemble_world(spec, std::move(refs));
}

FeatureSet encode_features(const Encoder& encoder, const std::vector<Vector>& xs) {
  std::vector<EmbeddingVector> feats;
  feats.reserve(xs.size());
  for (const auto& x : xs) feats.push_back(encoder.encode(x));
  return FeatureSet(std::move(feats));
}

const DomainSubspace& SubspaceBank::at(const std::string& encoder_id, const std::string& domain_id) const {
  auto it = subspaces.find({encoder_id, domain_id});
  if (it == subspaces.end()) {
    throw ConfigError("no subspace for encoder '" + encoder_id + "' and domain '" + domain_id + "'");
  }
  return it->second;
}

SubspaceBank build_subspace_bank(const World& world, const SubspaceOptions& options) {
  SubspaceBank bank;
  std::vector<const Encoder*> encoders;
  for (const auto& e : world.training_encoders) encoders.push_back(&e);
  encoders.push_back(&world.held_out_encoder);
  for (const Encoder* e : encoders) {
    for (const auto& d : world.spec.domains) {
      FeatureSet fs = encode_features(*e, world.references.at(d.id));
      bank.subspaces.emplace(SubspaceKey{e->id(), d.id}, build_subspace(fs, options));
      bank.features.emplace(SubspaceKey{e->id(), d.id}, std::move(fs));
    }
  }
  return bank;
}

double intra_set_spread(const FeatureSet& set) {
  double acc = 0.0;
  for (const auto& f : set.features()) acc += squared_norm(subtract(f, set.mean()));
  return std::sqrt(acc / static_cast<double>(set.count()));
}

std::vector<SeparabilityEntry> separability(const std::string& encoder_id,
                                            const std::vector<LabeledFeatures>& sets, double factor) {
  std::vector<SeparabilityEntry> out;
  for (std::size_t a = 0; a < sets.size(); ++a) {
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      SeparabilityEntry e;
      e.encoder_id = encoder_id;
      e.first = sets[a].domain_id;
      e.second = sets[b].domain_id;
      e.centroid_distance = std::sqrt(squared_norm(subtract(sets[a].features.mean(), sets[b].features.mean())));
      e.spread = std::max(intra_set_spread(sets[a].features), intra_set_spread(sets[b].features));
      e.separated = e.centroid_distance > factor * e.spread;
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<SeparabilityEntry> separability_precheck(const World& world,
                                                     const std::vector<std::string>& domain_ids,
                                                     double factor) {
  std::vector<SeparabilityEntry> all;
  for (const auto& encoder : world.training_encoders) {
    std::vector<LabeledFeatures> sets;
    for (const auto& id : domain_ids) {
      sets.push_back({id, encode_features(encoder, world.references.at(id))});
    }
    for (auto& e : separability(encoder.id(), sets, factor)) {
      if (!e.separated) {
        throw SeparabilityError("domains '" + e.first + "' and '" + e.second + "' are not separable under encoder '" +
                                e.encoder_id + "': centroid distance " + std::to_string(e.centroid_distance) +
                                " <= " + std::to_string(factor) + " x spread " + std::to_string(e.spread));
      }
      all.push_back(std::move(e));
    }
  }
  return all;
}

}  // namespace hda
