#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hda/gradcheck.hpp"

namespace hda {

struct GradCheckSuiteOptions {
  /// 100 random instances per primitive instead of 5, plus the distance loss
  /// through the default world's generator and encoder.
  bool full = false;
  std::uint64_t seed = 1;
  ad::GradCheckOptions check;
};

struct GradCheckSuiteResult {
  /// Checks that decide `passed()`.
  std::vector<ad::GradCheckReport> reports;
  /// Probes whose outcome is printed but not gated: the default-size chain at
  /// h = 1e-6, where finite-difference rounding exceeds the tolerance on
  /// coordinates with tiny gradients, and the near-collinear direction loss.
  std::vector<ad::GradCheckReport> recorded;

  bool passed() const;
  double max_relative_error() const;
};

/// Central-difference checks of every tape primitive, the four loss terms,
/// and the single- and two-domain training objectives on a small two-encoder
/// instance. Reports are ordered and named deterministically.
GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

/// Fixed-width, one line per report plus a summary line.
std::string format_gradcheck_report(const GradCheckSuiteResult& result);

}  // namespace hda
