#include "hda/ablation.hpp"

namespace hda {

const AblationRow& AblationTable::row(const std::string& loss, const std::string& encoders) const {
  for (const auto& r : rows)
    if (r.loss == loss && r.encoders == encoders) return r;
  throw ConfigError("ablation table has no row " + loss + "/" + encoders);
}

AblationTable ablation_suite(const AdaptationConfig& base, const World& world, const SubspaceBank& bank) {
  validate(base);
  const ResolvedRun resolved = resolve(base, world);

  const std::vector<std::pair<std::string, std::vector<std::string>>> encoder_sets = {
      {"single", {resolved.encoder_ids.front()}},
      {"ensemble", resolved.encoder_ids},
  };

  AblationTable table;
  for (const char* loss : {"dist_only", "direct_only", "full"}) {
    for (const auto& [label, ids] : encoder_sets) {
      AdaptationConfig config = base;
      config.dist_only = std::string(loss) == "dist_only";
      config.direct_only = std::string(loss) == "direct_only";
      config.encoder_ids = ids;
      const RunRecord record = run_adaptation(config, world, bank);
      table.rows.push_back({loss, label, ids, record.log.back().breakdown.total, record.final_metrics().report});
    }
  }
  return table;
}

}  // namespace hda
