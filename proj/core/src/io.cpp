#include "hda/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hda::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

Json parse_json(std::string_view text, const char* what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed ") + what + ": " + e.what());
  }
}

template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("invalid ") + what + ": " + e.what());
  }
}

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_rows(const Json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) throw IoError("matrix has wrong number of rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != cols) throw IoError("matrix row has wrong length");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

Vector vector_from(const Json& j) { return j.get<Vector>(); }

Json encoder_to_json(const EncoderSpec& e) {
  return Json{{"id", e.id},
              {"seed", e.seed},
              {"input_dim", e.input_dim},
              {"hidden_dim", e.hidden_dim},
              {"output_dim", e.output_dim},
              {"attended_dims", e.attended_dims}};
}

EncoderSpec encoder_from_json(const Json& j) {
  EncoderSpec e;
  e.id = j.at("id").get<std::string>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.input_dim = j.value("input_dim", e.input_dim);
  e.hidden_dim = j.value("hidden_dim", e.hidden_dim);
  e.output_dim = j.value("output_dim", e.output_dim);
  e.attended_dims = j.value("attended_dims", e.attended_dims);
  return e;
}

Json world_spec_json(const WorldSpec& spec) {
  Json encoders = Json::array();
  for (const auto& e : spec.training_encoders) encoders.push_back(encoder_to_json(e));
  Json domains = Json::array();
  for (const auto& d : spec.domains) {
    Json jd{{"id", d.id}, {"attribute_shift", d.attribute_shift}};
    jd["attribute_transform"] = d.attribute_transform ? matrix_rows(*d.attribute_transform) : Json(nullptr);
    jd["noise_scale"] = d.noise_scale;
    jd["k"] = d.k;
    domains.push_back(std::move(jd));
  }
  return Json{{"seed", spec.seed},
              {"generator",
               {{"latent", spec.generator.latent}, {"hidden", spec.generator.hidden}, {"output", spec.generator.output}}},
              {"generator_output_scale", spec.generator_output_scale},
              {"training_encoders", std::move(encoders)},
              {"held_out_encoder", encoder_to_json(spec.held_out_encoder)},
              {"domains", std::move(domains)}};
}

WorldSpec world_spec_from(const Json& j) {
  if (!j.is_object()) throw IoError("world description must be a JSON object");
  const std::uint64_t seed = j.value("seed", std::uint64_t{7});
  WorldSpec spec = default_world_spec(j.value("num_domains", std::size_t{2}), seed);
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    spec.generator.latent = g.value("latent", spec.generator.latent);
    spec.generator.hidden = g.value("hidden", spec.generator.hidden);
    spec.generator.output = g.value("output", spec.generator.output);
  }
  spec.generator_output_scale = j.value("generator_output_scale", spec.generator_output_scale);
  if (j.contains("training_encoders")) {
    spec.training_encoders.clear();
    for (const auto& e : j.at("training_encoders")) spec.training_encoders.push_back(encoder_from_json(e));
  }
  if (j.contains("held_out_encoder")) spec.held_out_encoder = encoder_from_json(j.at("held_out_encoder"));
  if (j.contains("domains")) {
    spec.domains.clear();
    for (const auto& jd : j.at("domains")) {
      SyntheticDomainSpec d;
      d.id = jd.at("id").get<std::string>();
      d.attribute_shift = vector_from(jd.at("attribute_shift"));
      if (jd.contains("attribute_transform") && !jd.at("attribute_transform").is_null()) {
        const std::size_t n = d.attribute_shift.size();
        d.attribute_transform = matrix_from_rows(jd.at("attribute_transform"), n, n);
      }
      d.noise_scale = jd.value("noise_scale", d.noise_scale);
      d.k = jd.value("k", d.k);
      spec.domains.push_back(std::move(d));
    }
  }
  return spec;
}

Json report_json(const MetricsReport& r) {
  Json sims = Json::array();
  for (const auto& s : r.semantic_similarity) {
    sims.push_back(Json{{"domain_id", s.domain_id}, {"value", round_significant(s.semantic_similarity)}});
  }
  return Json{{"n_samples", r.n_samples},
              {"consistency", round_significant(r.consistency)},
              {"diversity", round_significant(r.diversity)},
              {"semantic_similarity", std::move(sims)}};
}

Json breakdown_json(std::size_t step, const LossBreakdown& b) {
  Json per = Json::array();
  for (const auto& e : b.per_encoder) {
    per.push_back(Json{{"encoder_id", e.encoder_id}, {"dist", e.dist_term}, {"direct", e.direct_term}});
  }
  return Json{{"step", step},
              {"total", b.total},
              {"lambda", b.lambda},
              {"dist_weight", b.dist_weight},
              {"direct_weight", b.direct_weight},
              {"per_encoder", std::move(per)}};
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(std::string_view field) {
  const std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

double round_significant(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

std::string format_feature_csv(const std::vector<Vector>& rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  std::string out = std::to_string(d) + "," + std::to_string(rows.size()) + "\n";
  for (const auto& row : rows) {
    if (row.size() != d) throw DimensionError("feature CSV rows differ in length");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_real(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<Vector> parse_feature_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError("feature CSV is empty");
  const auto header = split(lines[0], ',');
  if (header.size() != 2) throw IoError("feature CSV header must be 'd,k'");
  const double d_real = parse_real(header[0]);
  const double k_real = parse_real(header[1]);
  if (d_real < 1 || k_real < 0 || d_real != std::floor(d_real) || k_real != std::floor(k_real)) {
    throw IoError("feature CSV header has invalid sizes");
  }
  const auto d = static_cast<std::size_t>(d_real);
  const auto k = static_cast<std::size_t>(k_real);
  if (lines.size() != k + 1) {
    throw IoError("feature CSV declares " + std::to_string(k) + " rows but has " + std::to_string(lines.size() - 1));
  }
  std::vector<Vector> rows;
  rows.reserve(k);
  for (std::size_t r = 1; r <= k; ++r) {
    const auto fields = split(lines[r], ',');
    if (fields.size() != d) throw IoError("feature CSV row " + std::to_string(r) + " has wrong length");
    Vector row;
    row.reserve(d);
    for (auto f : fields) row.push_back(parse_real(f));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_feature_csv(const fs::path& path, const std::vector<Vector>& rows) {
  write_text(path, format_feature_csv(rows));
}

std::vector<Vector> read_feature_csv(const fs::path& path) { return parse_feature_csv(read_text(path)); }

std::string subspace_to_json(const DomainSubspace& s) {
  Json basis = Json::array();
  for (std::size_t c = 0; c < s.rank(); ++c) basis.push_back(s.basis().column_vector(c));
  return Json{{"mean", s.mean()}, {"basis", std::move(basis)}, {"singular_values", s.singular_values()}}.dump(2);
}

DomainSubspace subspace_from_json(std::string_view text) {
  const Json j = parse_json(text, "subspace JSON");
  return guarded("subspace JSON", [&] {
    Vector mean = vector_from(j.at("mean"));
    std::vector<Vector> columns;
    for (const auto& c : j.at("basis")) {
      columns.push_back(vector_from(c));
      if (columns.back().size() != mean.size()) throw IoError("subspace basis vector has wrong length");
    }
    Matrix basis(mean.size(), columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) basis.set_column(c, columns[c]);
    return DomainSubspace(std::move(mean), std::move(basis), vector_from(j.at("singular_values")));
  });
}

std::string generator_to_json(const GeneratorParams& p) {
  const auto& d = p.dims();
  return Json{{"dims", {{"latent", d.latent}, {"hidden", d.hidden}, {"output", d.output}}},
              {"mutability", p.trainable() ? "trainable" : "frozen"},
              {"w1", matrix_rows(p.w1())},
              {"b1", p.b1().storage()},
              {"w2", matrix_rows(p.w2())},
              {"b2", p.b2().storage()}}
      .dump();
}

GeneratorParams generator_from_json(std::string_view text) {
  const Json j = parse_json(text, "generator JSON");
  return guarded("generator JSON", [&] {
    GeneratorDims d;
    d.latent = j.at("dims").at("latent").get<std::size_t>();
    d.hidden = j.at("dims").at("hidden").get<std::size_t>();
    d.output = j.at("dims").at("output").get<std::size_t>();
    const std::string mut = j.at("mutability").get<std::string>();
    if (mut != "trainable" && mut != "frozen") throw IoError("unknown mutability '" + mut + "'");
    return GeneratorParams(d, matrix_from_rows(j.at("w1"), d.hidden, d.latent),
                           Matrix::column(vector_from(j.at("b1"))), matrix_from_rows(j.at("w2"), d.output, d.hidden),
                           Matrix::column(vector_from(j.at("b2"))),
                           mut == "trainable" ? Mutability::Trainable : Mutability::Frozen);
  });
}

std::string config_to_json(const AdaptationConfig& c) {
  Json weights = Json::array();
  for (const auto& w : c.weights) weights.push_back(Json{{"domain_id", w.domain_id}, {"alpha", w.alpha}});
  return Json{{"lambda", c.lambda},
              {"weights", std::move(weights)},
              {"steps", c.steps},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"grad_clip_norm", c.grad_clip_norm},
              {"seed", c.seed},
              {"dist_only", c.dist_only},
              {"direct_only", c.direct_only},
              {"detach_projection", c.detach_projection},
              {"encoder_ids", c.encoder_ids},
              {"domain_ids", c.domain_ids},
              {"metric_every", c.metric_every},
              {"eval_samples", c.eval_samples},
              {"rank_tolerance", c.rank_tolerance},
              {"allow_point_subspace", c.allow_point_subspace}}
      .dump(2);
}

AdaptationConfig config_from_json(std::string_view text) {
  const Json j = parse_json(text, "config JSON");
  if (!j.is_object()) throw IoError("config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "lambda",        "weights",      "steps",          "batch_size",  "learning_rate",
      "adam_beta1",    "adam_beta2",   "adam_eps",       "grad_clip_norm", "seed",
      "dist_only",     "direct_only",  "detach_projection", "encoder_ids", "domain_ids",
      "metric_every",  "eval_samples", "rank_tolerance", "allow_point_subspace", "world"};
  for (const auto& [key, value] : j.items()) {
    if (kKnown.count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
  }
  AdaptationConfig c;
  guarded("config JSON", [&] {
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("weights")) {
      for (const auto& w : j.at("weights")) {
        c.weights.push_back({w.at("domain_id").get<std::string>(), w.at("alpha").get<double>()});
      }
    }
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.dist_only = j.value("dist_only", c.dist_only);
    c.direct_only = j.value("direct_only", c.direct_only);
    c.detach_projection = j.value("detach_projection", c.detach_projection);
    c.encoder_ids = j.value("encoder_ids", c.encoder_ids);
    c.domain_ids = j.value("domain_ids", c.domain_ids);
    c.metric_every = j.value("metric_every", c.metric_every);
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    c.rank_tolerance = j.value("rank_tolerance", c.rank_tolerance);
    c.allow_point_subspace = j.value("allow_point_subspace", c.allow_point_subspace);
    return 0;
  });
  // steps = 0 etc. are reported as ConfigError by validate().
  validate(c);
  return c;
}

std::string world_spec_to_json(const WorldSpec& spec) { return world_spec_json(spec).dump(2); }

WorldSpec world_spec_from_json(std::string_view text) {
  const Json j = parse_json(text, "world JSON");
  WorldSpec spec = guarded("world JSON", [&] { return world_spec_from(j); });
  validate(spec);
  return spec;
}

WorldSpec world_spec_from_config(std::string_view config_text, std::optional<std::uint64_t> seed_override) {
  const Json j = parse_json(config_text, "config JSON");
  if (!j.is_object()) throw IoError("config JSON must be an object");
  Json world = j.contains("world") ? j.at("world") : Json::object();
  if (seed_override && world.is_object()) world["seed"] = *seed_override;
  WorldSpec spec = guarded("world JSON", [&] { return world_spec_from(world); });
  validate(spec);
  return spec;
}

std::string step_log_line(const StepLog& entry) { return breakdown_json(entry.step, entry.breakdown).dump(); }

StepLog step_log_from_json(std::string_view line) {
  const Json j = parse_json(line, "training log line");
  return guarded("training log line", [&] {
    StepLog s;
    s.step = j.at("step").get<std::size_t>();
    s.breakdown.total = j.at("total").get<double>();
    s.breakdown.lambda = j.at("lambda").get<double>();
    s.breakdown.dist_weight = j.value("dist_weight", 1.0);
    s.breakdown.direct_weight = j.value("direct_weight", s.breakdown.lambda);
    for (const auto& e : j.at("per_encoder")) {
      s.breakdown.per_encoder.push_back(
          {e.at("encoder_id").get<std::string>(), e.at("dist").get<double>(), e.at("direct").get<double>()});
    }
    return s;
  });
}

std::string report_to_json(const MetricsReport& report) { return report_json(report).dump(2) + "\n"; }

MetricsReport report_from_json(std::string_view text) {
  const Json j = parse_json(text, "report JSON");
  return guarded("report JSON", [&] {
    MetricsReport r;
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.consistency = j.at("consistency").get<double>();
    r.diversity = j.at("diversity").get<double>();
    for (const auto& s : j.at("semantic_similarity")) {
      r.semantic_similarity.push_back({s.at("domain_id").get<std::string>(), s.at("value").get<double>()});
    }
    return r;
  });
}

std::string ablation_to_json(const AblationTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    rows.push_back(Json{{"loss", r.loss},
                        {"encoders", r.encoders},
                        {"encoder_ids", r.encoder_ids},
                        {"final_loss", round_significant(r.final_loss)},
                        {"report", report_json(r.report)}});
  }
  return Json{{"rows", std::move(rows)}}.dump(2) + "\n";
}

std::string ablation_to_csv(const AblationTable& table) {
  std::set<std::string> domain_set;
  std::vector<std::string> domains;
  for (const auto& r : table.rows)
    for (const auto& s : r.report.semantic_similarity)
      if (domain_set.insert(s.domain_id).second) domains.push_back(s.domain_id);
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  std::string out = "loss,encoders,final_loss,consistency,diversity";
  for (const auto& d : domains) out += ",semantic_similarity_" + d;
  out += '\n';
  for (const auto& r : table.rows) {
    out += r.loss + "," + r.encoders + "," + fmt(r.final_loss) + "," + fmt(r.report.consistency) + "," +
           fmt(r.report.diversity);
    for (const auto& d : domains) out += "," + fmt(r.report.semantic_similarity_of(d));
    out += '\n';
  }
  return out;
}

std::string plane_points_to_csv(const std::vector<PlanePoint>& points) {
  std::string out = "domain_id,x,y\n";
  for (const auto& p : points) out += p.domain_id + "," + format_real(p.x) + "," + format_real(p.y) + "\n";
  return out;
}

std::vector<PlanePoint> parse_plane_points_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "domain_id,x,y") throw IoError("coordinates CSV needs header 'domain_id,x,y'");
  std::vector<PlanePoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 3) throw IoError("coordinates CSV row " + std::to_string(i) + " needs 3 fields");
    out.push_back({std::string(f[0]), parse_real(f[1]), parse_real(f[2])});
  }
  return out;
}

std::string run_summary_to_json(const RunRecord& record) {
  Json weights = Json::array();
  for (const auto& w : record.resolved.weights) weights.push_back(Json{{"domain_id", w.domain_id}, {"alpha", w.alpha}});
  Json snaps = Json::array();
  for (const auto& m : record.metrics) {
    snaps.push_back(Json{{"step", m.step}, {"final", m.final}, {"report", report_json(m.report)}});
  }
  Json checkpoints = Json::array();
  for (const auto& [step, params] : record.checkpoints) checkpoints.push_back(step);
  return Json{{"config", Json::parse(config_to_json(record.config))},
              {"resolved_weights", std::move(weights)},
              {"encoder_ids", record.resolved.encoder_ids},
              {"steps_completed", record.log.size()},
              {"final_total", record.log.empty() ? 0.0 : record.log.back().breakdown.total},
              {"best_consistency_step", record.best_consistency_step},
              {"checkpoint_steps", std::move(checkpoints)},
              {"metrics", std::move(snaps)}}
             .dump(2) +
         "\n";
}

void save_world(const World& world, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "world.json", world_spec_to_json(world.spec) + "\n");
  for (const auto& d : world.spec.domains) {
    write_feature_csv(dir / ("refs_" + d.id + ".csv"), world.references.at(d.id));
  }
}

World load_world(const fs::path& dir) {
  const WorldSpec spec = world_spec_from_json(read_text(dir / "world.json"));
  std::map<std::string, std::vector<Vector>> refs;
  for (const auto& d : spec.domains) refs[d.id] = read_feature_csv(dir / ("refs_" + d.id + ".csv"));
  return assemble_world(spec, std::move(refs));
}

void save_subspace_bank(const SubspaceBank& bank, const fs::path& dir) {
  fs::create_directories(dir);
  Json index = Json::array();
  for (const auto& [key, subspace] : bank.subspaces) {
    const std::string file = key.first + "__" + key.second + ".json";
    write_text(dir / file, subspace_to_json(subspace) + "\n");
    index.push_back({{"encoder_id", key.first}, {"domain_id", key.second}, {"file", file}});
  }
  write_text(dir / "index.json", Json{{"subspaces", index}}.dump(2) + "\n");
}

SubspaceBank load_subspace_bank(const fs::path& dir) {
  const Json index = parse_json(read_text(dir / "index.json"), "subspace index");
  SubspaceBank bank;
  guarded("subspace index", [&] {
    for (const auto& e : index.at("subspaces")) {
      const SubspaceKey key{e.at("encoder_id").get<std::string>(), e.at("domain_id").get<std::string>()};
      bank.subspaces.emplace(key, subspace_from_json(read_text(dir / e.at("file").get<std::string>())));
    }
    return 0;
  });
  return bank;
}

void save_run(const RunRecord& record, const World& world, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "config.json", config_to_json(record.config) + "\n");
  write_text(dir / "run.json", run_summary_to_json(record));
  std::string log;
  for (const auto& entry : record.log) log += step_log_line(entry) + "\n";
  write_text(dir / "train_log.jsonl", log);
  for (const auto& [step, params] : record.checkpoints) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.json", step);
    write_text(dir / "checkpoints" / name, generator_to_json(params) + "\n");
  }
  write_text(dir / "final_generator.json", generator_to_json(record.final_params) + "\n");
  save_world(world, dir / "world");
}

}  // namespace hda::io
