#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hda/ablation.hpp"
#include "hda/adapt.hpp"
#include "hda/subspace.hpp"
#include "hda/world.hpp"

// Text formats. All parsers throw IoError on malformed input; values that
// parse but violate a domain invariant raise the matching domain error.
namespace hda::io {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Rounds to `digits` significant decimal digits (used for report files).
double round_significant(double value, int digits = 12);

// Feature matrix CSV: first line "d,k", then k rows of d comma-separated reals.
std::string format_feature_csv(const std::vector<Vector>& rows);
std::vector<Vector> parse_feature_csv(std::string_view text);
void write_feature_csv(const std::filesystem::path& path, const std::vector<Vector>& rows);
std::vector<Vector> read_feature_csv(const std::filesystem::path& path);

// {"mean": [...], "basis": [[...], ...], "singular_values": [...]}; `basis`
// lists the r orthonormal basis vectors, each of length d.
std::string subspace_to_json(const DomainSubspace& subspace);
DomainSubspace subspace_from_json(std::string_view text);

std::string generator_to_json(const GeneratorParams& params);
GeneratorParams generator_from_json(std::string_view text);

/// AdaptationConfig with snake_case keys. Unknown keys are rejected, except
/// "world", which holds the world description read by world_spec_from_config.
std::string config_to_json(const AdaptationConfig& config);
AdaptationConfig config_from_json(std::string_view text);

std::string world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(std::string_view text);
/// The "world" member of a config document, or the default world. A world
/// object without "domains" starts from default_world_spec(num_domains, seed).
/// `seed_override` replaces the world seed before defaults are derived.
WorldSpec world_spec_from_config(std::string_view config_text,
                                 std::optional<std::uint64_t> seed_override = std::nullopt);

/// One JSON-lines record: {"step", "total", "lambda", "per_encoder": [...]}.
std::string step_log_line(const StepLog& entry);
StepLog step_log_from_json(std::string_view line);

/// Fixed key order, 12 significant digits.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(std::string_view text);

std::string ablation_to_json(const AblationTable& table);
std::string ablation_to_csv(const AblationTable& table);

std::string plane_points_to_csv(const std::vector<PlanePoint>& points);
std::vector<PlanePoint> parse_plane_points_csv(std::string_view text);

/// Run summary: config, resolved weights/encoders, metric snapshots and the
/// best-consistency step.
std::string run_summary_to_json(const RunRecord& record);

// World directory: world.json plus refs_<domain>.csv per domain.
void save_world(const World& world, const std::filesystem::path& dir);
World load_world(const std::filesystem::path& dir);

// Subspace directory: index.json listing (encoder_id, domain_id, file) plus
// one <encoder>__<domain>.json per subspace.
void save_subspace_bank(const SubspaceBank& bank, const std::filesystem::path& dir);
SubspaceBank load_subspace_bank(const std::filesystem::path& dir);

// Run directory: config.json, run.json, train_log.jsonl,
// checkpoints/step_NNNN.json, final_generator.json and a copy of the world.
void save_run(const RunRecord& record, const World& world, const std::filesystem::path& dir);

}  // namespace hda::io
