#include "mixseg/gradcheck.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mixseg {

double evaluate_scalar(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  return out.value().item();
}

Tensor analytic_gradient(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var in = tape.leaf(x);
  Var out = f(tape, in);
  if (!std::isfinite(out.value().item())) {
    throw std::domain_error("grad_check: f(x) is not finite");
  }
  tape.backward(out);
  const Tensor* g = in.grad();
  return g ? *g : Tensor(x.shape(), 0.0);
}

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, const GradCheckOptions& opts) {
  const Tensor analytic = analytic_gradient(f, x);
  std::vector<std::size_t> coords = opts.coords;
  if (coords.empty()) {
    coords.resize(x.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }
  GradCheckResult result;
  Tensor probe = x;
  for (std::size_t i : coords) {
    const double orig = probe[i];
    probe[i] = orig + opts.h;
    const double fp = evaluate_scalar(f, probe);
    probe[i] = orig - opts.h;
    const double fm = evaluate_scalar(f, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * opts.h);
    const double a = analytic[i] + opts.analytic_bias;
    const double err = std::abs(a - numeric) / std::max(opts.floor, std::abs(a) + std::abs(numeric));
    if (err > result.max_rel_error || result.coords_checked == 0) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
    }
    ++result.coords_checked;
  }
  return result;
}

}  // namespace mixseg
