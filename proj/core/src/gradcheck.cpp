#include "hda/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hda/errors.hpp"

namespace hda::ad {

std::pair<double, Vector> value_and_grad(const ScalarProgram& program, std::span<const double> params) {
  Tape tape;
  Var p = tape.variable(Matrix::column(params));
  Var out = program(tape, p);
  const double value = out.scalar();
  if (!std::isfinite(value)) throw NumericalError("gradient check: non-finite forward value");
  tape.backward(out);
  const auto g = p.grad().values();
  return {value, Vector(g.begin(), g.end())};
}

GradCheckReport compare_gradient(std::string name, const ValueFn& value, std::span<const double> params,
                                 std::span<const double> analytic, const GradCheckOptions& options) {
  if (analytic.size() != params.size()) throw DimensionError("gradient check: gradient length mismatch");
  GradCheckReport report;
  report.name = std::move(name);
  report.step = options.step;
  report.tolerance = options.tolerance;

  Vector probe(params.begin(), params.end());
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + options.step;
    const double up = value(probe);
    probe[j] = saved - options.step;
    const double down = value(probe);
    probe[j] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("gradient check '" + report.name + "': non-finite value at coordinate " +
                           std::to_string(j));
    }
    const double numeric = (up - down) / (2.0 * options.step);
    const double abs_err = std::abs(numeric - analytic[j]);
    const double denom = std::max(std::abs(numeric), std::abs(analytic[j]));
    if (denom < options.denominator_floor) {
      ++report.skipped;
      report.max_skipped_abs_error = std::max(report.max_skipped_abs_error, abs_err);
      continue;
    }
    ++report.checked;
    report.max_relative_error = std::max(report.max_relative_error, abs_err / denom);
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(std::string name, const ScalarProgram& program, std::span<const double> params,
                           const GradCheckOptions& options) {
  const auto [value, grad] = value_and_grad(program, params);
  (void)value;
  const ValueFn eval = [&program](std::span<const double> p) {
    Tape tape;
    return program(tape, tape.variable(Matrix::column(p))).scalar();
  };
  return compare_gradient(std::move(name), eval, params, grad, options);
}

}  // namespace hda::ad
