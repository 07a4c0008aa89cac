#pragma once

#include <string>
#include <vector>

#include "hda/adapt.hpp"

namespace hda {

struct AblationRow {
  std::string loss;          // "dist_only", "direct_only" or "full"
  std::string encoders;      // "single" or "ensemble"
  std::vector<std::string> encoder_ids;
  double final_loss = 0.0;   // logged total of the last step
  MetricsReport report;      // metrics of the final parameters
};

struct AblationTable {
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& loss, const std::string& encoders) const;
};

/// Runs {dist_only, direct_only, full} x {first training encoder, all
/// training encoders} from `base` with its seed shared by every run.
AblationTable ablation_suite(const AdaptationConfig& base, const World& world, const SubspaceBank& bank);

}  // namespace hda
