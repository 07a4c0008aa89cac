#pragma once

#include <functional>
#include <span>
#include <string>

#include "hda/autodiff.hpp"

namespace hda::ad {

/// Builds a scalar on `tape` from a single flat parameter leaf.
using ScalarProgram = std::function<Var(Tape& tape, Var params)>;
using ValueFn = std::function<double(std::span<const double>)>;

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Coordinates where max(|analytic|, |numeric|) falls below this are not
  /// scored relatively; their absolute error is reported separately.
  double denominator_floor = 1e-6;
};

struct GradCheckReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_relative_error = 0.0;
  double max_skipped_abs_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares an analytic gradient against central differences of `value`.
/// Throws NumericalError if any evaluation is non-finite.
GradCheckReport compare_gradient(std::string name, const ValueFn& value, std::span<const double> params,
                                 std::span<const double> analytic, const GradCheckOptions& options = {});

/// Runs `program` on a fresh tape, backpropagates, and compares the tape
/// gradient against central differences of the same program.
GradCheckReport grad_check(std::string name, const ScalarProgram& program, std::span<const double> params,
                           const GradCheckOptions& options = {});

/// Evaluates `program` once and returns (value, gradient w.r.t. params).
std::pair<double, Vector> value_and_grad(const ScalarProgram& program, std::span<const double> params);

}  // namespace hda::ad
