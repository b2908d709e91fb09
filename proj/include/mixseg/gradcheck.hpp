#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mixseg/autodiff.hpp"

namespace mixseg {

/// Scalar-valued function of one tensor argument, built on a fresh tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckOptions {
  double h = 1e-6;
  /// Denominator floor; keeps near-zero gradients from dominating.
  double floor = 1e-8;
  /// Coordinates to probe; all of them when empty.
  std::vector<std::size_t> coords;
  /// Added to the analytic gradient before comparison. Negative-control hook.
  double analytic_bias = 0.0;
};

/// Compares reverse-mode gradients with central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. The per-coordinate error is
/// |a - n| / max(floor, |a| + |n|); the maximum is reported.
/// Throws std::domain_error if f(x) is not finite.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, const GradCheckOptions& opts = {});

/// Evaluates f(x) without keeping the tape.
double evaluate_scalar(const ScalarFn& f, const Tensor& x);

/// Autodiff gradient of f at x.
Tensor analytic_gradient(const ScalarFn& f, const Tensor& x);

}  // namespace mixseg
