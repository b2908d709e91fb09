#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mixseg {

struct GradCheckRow {
  std::string op;
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  bool pass = false;
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  double tolerance = 1e-4;
  double h = 1e-6;
  /// Name of an op whose analytic gradient is deliberately biased.
  std::string corrupt_op;
};

/// Names of every registered check, in report order.
std::vector<std::string> gradcheck_op_names();

/// Finite-difference check of every tensor op and loss on
/// random inputs (spatial extents up to 8x8) kept away from non-smooth
/// points, over `seeds` consecutive seeds. One row per op with the worst
/// error seen.
std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckSuiteOptions& opts);

}  // namespace mixseg
