#include "mixseg/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "mixseg/gradcheck.hpp"
#include "mixseg/losses.hpp"
#include "mixseg/ops.hpp"
#include "mixseg/rng.hpp"

namespace mixseg {
namespace {

using CheckFn = std::function<GradCheckResult(Rng&, const GradCheckOptions&)>;

struct Case {
  std::string name;
  CheckFn run;
};

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Uniform in [lo, hi] but at least `gap` away from `point`.
Tensor away_from(Rng& rng, Shape shape, double point, double gap, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) {
    do {
      v = uniform(rng, lo, hi);
    } while (std::abs(v - point) < gap);
  }
  return t;
}

// Entries pairwise separated by at least 0.5 / numel, in [0.05, 0.95].
Tensor distinct_values(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  std::vector<std::size_t> rank(t.numel());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  shuffle(rank, rng);
  const double step = 0.9 / static_cast<double>(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = 0.05 + step * (static_cast<double>(rank[i]) + 0.25 + 0.5 * uniform01(rng));
  }
  return t;
}

Tensor binary_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = bernoulli(rng, 0.5) ? 1.0 : 0.0;
  return t;
}

std::size_t extent(Rng& rng, std::size_t lo = 2, std::size_t hi = 8) {
  return lo + uniform_index(rng, hi - lo + 1);
}

// sum(r * out) with fixed random weights r, so every output entry matters.
Var weighted(Var out, const Tensor& r) {
  if (out.numel() == 1) return out * r[0];
  return ops::sum(out * out.tape().constant(r));
}

GradCheckResult worst(const GradCheckResult& a, const GradCheckResult& b) {
  GradCheckResult w = a.max_rel_error >= b.max_rel_error ? a : b;
  w.coords_checked = a.coords_checked + b.coords_checked;
  return w;
}

CheckFn binary_case(ops::Binary kind) {
  return [kind](Rng& rng, const GradCheckOptions& o) {
    const Shape s{extent(rng), extent(rng)};
    Tensor a = random_tensor(rng, s, -2.0, 2.0);
    Tensor b = random_tensor(rng, s, -2.0, 2.0);
    if (kind == ops::Binary::Div) b = away_from(rng, s, 0.0, 0.5, -2.0, 2.0);
    if (kind == ops::Binary::Min) {
      for (std::size_t i = 0; i < a.numel(); ++i) {
        if (std::abs(a[i] - b[i]) < 0.1) b[i] = a[i] + (bernoulli(rng, 0.5) ? 0.3 : -0.3);
      }
    }
    const Tensor r = random_tensor(rng, s, 0.5, 1.5);
    const auto wrt_a = grad_check(
        [&](Tape& t, Var x) { return weighted(ops::elementwise(kind, x, t.constant(b)), r); }, a, o);
    const auto wrt_b = grad_check(
        [&](Tape& t, Var x) { return weighted(ops::elementwise(kind, t.constant(a), x), r); }, b, o);
    return worst(wrt_a, wrt_b);
  };
}

CheckFn unary_case(std::function<Var(Var)> op, double kink, double gap, double lo, double hi) {
  return [=](Rng& rng, const GradCheckOptions& o) {
    const Shape s{extent(rng), extent(rng)};
    const Tensor x = away_from(rng, s, kink, gap, lo, hi);
    const Tensor r = random_tensor(rng, s, 0.5, 1.5);
    return grad_check([&](Tape&, Var v) { return weighted(op(v), r); }, x, o);
  };
}

GradCheckResult conv_check(Rng& rng, const GradCheckOptions& o, std::size_t k, std::size_t stride,
                           std::size_t pad) {
  const std::size_t c_in = extent(rng, 1, 3), c_out = extent(rng, 1, 3);
  const Shape xs{c_in, extent(rng, 3, 8), extent(rng, 3, 8)};
  const Tensor x = random_tensor(rng, xs, -1.0, 1.0);
  const Tensor w = random_tensor(rng, {c_out, c_in, k, k}, -1.0, 1.0);
  const Tensor b = random_tensor(rng, {c_out}, -1.0, 1.0);
  Tape probe;
  const Shape out_shape = ops::conv2d(probe.constant(x), probe.constant(w), stride, pad).shape();
  const Tensor r = random_tensor(rng, out_shape, 0.5, 1.5);
  auto conv = [&](Tape&, Var xv, Var wv, Var bv) { return weighted(ops::conv2d(xv, wv, stride, pad, bv), r); };
  const auto gx = grad_check([&](Tape& t, Var v) { return conv(t, v, t.constant(w), t.constant(b)); }, x, o);
  const auto gw = grad_check([&](Tape& t, Var v) { return conv(t, t.constant(x), v, t.constant(b)); }, w, o);
  const auto gb = grad_check([&](Tape& t, Var v) { return conv(t, t.constant(x), t.constant(w), v); }, b, o);
  return worst(worst(gx, gw), gb);
}

BoxAnnotation random_box(Rng& rng, std::size_t h, std::size_t w) {
  int x0 = static_cast<int>(uniform_index(rng, w)), x1 = static_cast<int>(uniform_index(rng, w));
  int y0 = static_cast<int>(uniform_index(rng, h)), y1 = static_cast<int>(uniform_index(rng, h));
  return {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
}

ScribbleAnnotation random_scribble(Rng& rng, std::size_t h, std::size_t w) {
  ScribbleAnnotation s(w, h);
  for (auto& c : s.codes) {
    const double u = uniform01(rng);
    c = u < 0.2 ? ScribbleCode::Foreground : (u < 0.4 ? ScribbleCode::Background : ScribbleCode::Unlabeled);
  }
  s.codes[uniform_index(rng, s.codes.size())] = ScribbleCode::Foreground;
  return s;
}

std::vector<Case> make_cases() {
  using ops::Binary;
  std::vector<Case> c;
  c.push_back({"add", binary_case(Binary::Add)});
  c.push_back({"sub", binary_case(Binary::Sub)});
  c.push_back({"mul", binary_case(Binary::Mul)});
  c.push_back({"div", binary_case(Binary::Div)});
  c.push_back({"min", binary_case(Binary::Min)});
  c.push_back({"abs", unary_case([](Var v) { return ops::abs(v); }, 0.0, 0.1, -2.0, 2.0)});
  c.push_back({"neg", unary_case([](Var v) { return ops::neg(v); }, 0.0, 0.0, -2.0, 2.0)});
  c.push_back({"relu", unary_case([](Var v) { return ops::relu(v); }, 0.0, 0.1, -2.0, 2.0)});
  c.push_back({"sigmoid", unary_case([](Var v) { return ops::sigmoid(v); }, 0.0, 0.0, -4.0, 4.0)});
  c.push_back({"safe_log", unary_case([](Var v) { return ops::safe_log(v); }, 0.0, 0.0, 0.1, 2.0)});
  for (auto axis : {ops::Axis::Rows, ops::Axis::Cols}) {
    c.push_back({axis == ops::Axis::Rows ? "axis_max_rows" : "axis_max_cols",
                 [axis](Rng& rng, const GradCheckOptions& o) {
                   const std::size_t h = extent(rng), w = extent(rng);
                   const Tensor x = distinct_values(rng, {h, w});
                   const Tensor r = random_tensor(rng, axis == ops::Axis::Rows ? Shape{1, w} : Shape{h, 1}, 0.5, 1.5);
                   return grad_check([&](Tape&, Var v) { return weighted(ops::axis_max(v, axis), r); }, x, o);
                 }});
  }
  c.push_back({"sum", unary_case([](Var v) { return ops::sum(v); }, 0.0, 0.0, -2.0, 2.0)});
  c.push_back({"mean", unary_case([](Var v) { return ops::mean(v); }, 0.0, 0.0, -2.0, 2.0)});
  c.push_back({"reshape", [](Rng& rng, const GradCheckOptions& o) {
                 const std::size_t h = extent(rng), w = extent(rng);
                 const Tensor x = random_tensor(rng, {h, w}, -2.0, 2.0);
                 const Tensor r = random_tensor(rng, {w, h}, 0.5, 1.5);
                 return grad_check([&](Tape&, Var v) { return weighted(ops::reshape(v, {w, h}), r); }, x, o);
               }});
  c.push_back({"conv2d", [](Rng& rng, const GradCheckOptions& o) {
                 return worst(worst(conv_check(rng, o, 3, 1, 1), conv_check(rng, o, 3, 2, 1)),
                              conv_check(rng, o, 1, 1, 0));
               }});
  c.push_back({"upsample_bilinear", [](Rng& rng, const GradCheckOptions& o) {
                 const std::size_t h = extent(rng, 1, 4), w = extent(rng, 1, 4);
                 const std::size_t oh = extent(rng, h, 8), ow = extent(rng, w, 8);
                 const Tensor x = random_tensor(rng, {2, h, w}, -1.0, 1.0);
                 const Tensor r = random_tensor(rng, {2, oh, ow}, 0.5, 1.5);
                 return grad_check([&](Tape&, Var v) { return weighted(ops::upsample_bilinear(v, oh, ow), r); }, x, o);
               }});

  // Losses, differentiated with respect to the probability map.
  c.push_back({"bce", [](Rng& rng, const GradCheckOptions& o) {
                 const Shape s{extent(rng), extent(rng)};
                 const Tensor y = random_tensor(rng, s, 0.05, 0.95);
                 const Tensor m = binary_tensor(rng, s);
                 auto f = [&](losses::Normalization n) {
                   return grad_check([&](Tape& t, Var v) { return losses::loss_bce(v, t.constant(m), n); }, y, o);
                 };
                 return worst(f(losses::Normalization::Sum), f(losses::Normalization::Mean));
               }});
  c.push_back({"dice", [](Rng& rng, const GradCheckOptions& o) {
                 const Shape s{extent(rng), extent(rng)};
                 const Tensor y = random_tensor(rng, s, 0.05, 0.95);
                 const Tensor m = binary_tensor(rng, s);
                 return grad_check([&](Tape& t, Var v) { return losses::loss_dice(v, t.constant(m)); }, y, o);
               }});
  c.push_back({"loss_sp", [](Rng& rng, const GradCheckOptions& o) {
                 const std::size_t h = extent(rng), w = extent(rng);
                 const Tensor y = distinct_values(rng, {h, w});
                 const BoxAnnotation box = random_box(rng, h, w);
                 return grad_check([&](Tape&, Var v) { return losses::loss_sp(v, box); }, y, o);
               }});
  c.push_back({"loss_bme", [](Rng& rng, const GradCheckOptions& o) {
                 const Shape s{extent(rng), extent(rng)};
                 const Tensor y = away_from(rng, s, 0.5, 0.05, 0.02, 0.98);
                 const Tensor r = random_tensor(rng, s, 0.5, 1.5);
                 return grad_check([&](Tape&, Var v) { return weighted(losses::loss_bme(v), r); }, y, o);
               }});
  c.push_back({"loss_scribble", [](Rng& rng, const GradCheckOptions& o) {
                 const std::size_t h = extent(rng), w = extent(rng);
                 const Tensor y = away_from(rng, {h, w}, 0.5, 0.05, 0.02, 0.98);
                 const ScribbleAnnotation s = random_scribble(rng, h, w);
                 return grad_check([&](Tape&, Var v) { return losses::loss_scribble(v, s); }, y, o);
               }});
  c.push_back({"linear_fuse", [](Rng& rng, const GradCheckOptions& o) {
                 const Shape s{extent(rng), extent(rng)};
                 const Tensor a = random_tensor(rng, s, 0.0, 1.0);
                 const Tensor b = random_tensor(rng, s, 0.0, 1.0);
                 const Tensor r = random_tensor(rng, s, 0.5, 1.5);
                 const double lambda = uniform(rng, 0.0, 1.0);
                 const auto ga = grad_check([&](Tape& t, Var v) { return weighted(losses::linear_fuse(v, t.constant(b), lambda), r); }, a, o);
                 const auto gb = grad_check([&](Tape& t, Var v) { return weighted(losses::linear_fuse(t.constant(a), v, lambda), r); }, b, o);
                 return worst(ga, gb);
               }});
  c.push_back({"loss_lr", [](Rng& rng, const GradCheckOptions& o) {
                 const Shape s{extent(rng), extent(rng)};
                 const Tensor y = random_tensor(rng, s, 0.0, 1.0);
                 Tensor m(s);
                 for (std::size_t i = 0; i < m.numel(); ++i) m[i] = y[i] + (bernoulli(rng, 0.5) ? 0.2 : -0.2);
                 return grad_check([&](Tape&, Var v) { return losses::loss_lr(v, m); }, y, o);
               }});
  c.push_back({"loss_total", [](Rng& rng, const GradCheckOptions& o) {
                 // All four terms on one logit map: y = sigmoid(x).
                 const std::size_t h = extent(rng), w = extent(rng);
                 const Tensor x = distinct_values(rng, {h, w});
                 Tensor logits(x.shape());
                 for (std::size_t i = 0; i < x.numel(); ++i) logits[i] = 8.0 * (x[i] - 0.5) + (x[i] < 0.5 ? -0.3 : 0.3);
                 const Tensor m = binary_tensor(rng, {h, w});
                 const BoxAnnotation box = random_box(rng, h, w);
                 const ScribbleAnnotation sc = random_scribble(rng, h, w);
                 Tensor pseudo(x.shape());
                 for (std::size_t i = 0; i < x.numel(); ++i) {
                   const double y = 1.0 / (1.0 + std::exp(-logits[i]));
                   pseudo[i] = y > 0.5 ? y - 0.2 : y + 0.2;
                 }
                 return grad_check(
                     [&](Tape& t, Var v) {
                       const Var y = ops::sigmoid(v);
                       losses::LossParts parts;
                       parts.pixel = losses::loss_bce(y, t.constant(m), losses::Normalization::Mean) +
                                     losses::loss_dice(y, t.constant(m));
                       parts.sp = losses::loss_sp(y, box);
                       parts.scribble = losses::loss_scribble(y, sc);
                       parts.lr = losses::loss_lr(y, pseudo);
                       return *losses::loss_total(parts, {}).total;
                     },
                     logits, o);
               }});
  return c;
}

}  // namespace

std::vector<std::string> gradcheck_op_names() {
  std::vector<std::string> names;
  for (const Case& c : make_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckSuiteOptions& opts) {
  std::vector<GradCheckRow> rows;
  for (const Case& c : make_cases()) {
    GradCheckOptions o;
    o.h = opts.h;
    if (c.name == opts.corrupt_op) o.analytic_bias = 1e-2;
    GradCheckRow row{c.name, 0.0, 0, false};
    for (std::size_t s = 0; s < opts.seeds; ++s) {
      Rng rng(derive_seed(opts.seed + s, c.name));
      const GradCheckResult r = c.run(rng, o);
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      row.coords += r.coords_checked;
    }
    row.pass = row.max_rel_error <= opts.tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mixseg
