#include "mixseg/losses.hpp"

#include <stdexcept>

#include "mixseg/ops.hpp"

namespace mixseg::losses {

namespace {

void require_same(const char* what, Var a, Var b) {
  if (a.shape() != b.shape()) throw ShapeError(what, a.shape(), b.shape());
}

}  // namespace

Var bce_map(Var y, Var m) {
  require_same("bce", y, m);
  const Var pos = m * ops::safe_log(y);
  const Var negative = (1.0 - m) * ops::safe_log(1.0 - y);
  return -(pos + negative);
}

Var loss_bce(Var y, Var m, Normalization norm) {
  const Var per_pixel = bce_map(y, m);
  return norm == Normalization::Sum ? ops::sum(per_pixel) : ops::mean(per_pixel);
}

Var loss_dice(Var y, Var m) {
  require_same("dice", y, m);
  Var num = 2.0 * ops::sum(m * y);
  Var den = ops::sum(m + y);
  if (den.value()[0] == 0.0) {
    num = num + 1.0;
    den = den + 1.0;
  }
  return 1.0 - num / den;
}

Projections project_pair(Var y, const BoxAnnotation& box) {
  if (y.value().rank() != 2) throw ShapeError("project_pair expects [H,W], got " + shape_str(y.shape()));
  const std::size_t h = y.shape()[0], w = y.shape()[1];
  validate_box(box, w, h);
  Tensor m_w({1, w}, 0.0), m_h({h, 1}, 0.0);
  for (int x = box.x0; x <= box.x1; ++x) m_w[static_cast<std::size_t>(x)] = 1.0;
  for (int r = box.y0; r <= box.y1; ++r) m_h[static_cast<std::size_t>(r)] = 1.0;
  Tape& t = y.tape();
  return {ops::axis_max(y, ops::Axis::Rows), ops::axis_max(y, ops::Axis::Cols),
          t.constant(std::move(m_w)), t.constant(std::move(m_h))};
}

Var loss_sp(Var y, const BoxAnnotation& box, Normalization bce_norm) {
  const Projections p = project_pair(y, box);
  const Var bce = loss_bce(p.y_w, p.m_w, bce_norm) + loss_bce(p.y_h, p.m_h, bce_norm);
  const Var dice = loss_dice(p.y_w, p.m_w) + loss_dice(p.y_h, p.m_h);
  return 0.5 * bce + 0.5 * dice;
}

Var loss_bme(Var y) { return ops::min(-ops::safe_log(y), -ops::safe_log(1.0 - y)); }

Var loss_scribble(Var y, const ScribbleAnnotation& scribble) {
  if (y.shape() != Shape{scribble.height, scribble.width}) {
    throw ShapeError("loss_scribble", y.shape(), Shape{scribble.height, scribble.width});
  }
  const std::size_t n = scribble.codes.size();
  const std::size_t labeled = scribble.labeled_count();
  if (labeled == 0) throw AnnotationError("loss_scribble: scribble set S is empty");

  Tensor unlabeled(y.shape(), 0.0), in_s(y.shape(), 0.0), target(y.shape(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    switch (scribble.codes[i]) {
      case ScribbleCode::Unlabeled: unlabeled[i] = 1.0; break;
      case ScribbleCode::Background: in_s[i] = 1.0; break;
      case ScribbleCode::Foreground:
        in_s[i] = 1.0;
        target[i] = 1.0;
        break;
    }
  }
  Tape& t = y.tape();
  const Var u_mask = t.constant(std::move(unlabeled));
  const Var s_mask = t.constant(std::move(in_s));
  const Var labels = t.constant(std::move(target));
  Var total = ops::sum(s_mask * bce_map(y, labels));
  if (labeled < n) total = ops::sum(u_mask * loss_bme(y)) + total;
  return total / static_cast<double>(n);
}

Var linear_fuse(Var a, Var b, double lambda) {
  require_same("linear_fuse", a, b);
  return lambda * a + (1.0 - lambda) * b;
}

Tensor linear_fuse(const Tensor& a, const Tensor& b, double lambda) {
  if (a.shape() != b.shape()) throw ShapeError("linear_fuse", a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return out;
}

Var loss_lr(Var y_ph, const Tensor& m_ph) {
  if (y_ph.shape() != m_ph.shape()) throw ShapeError("loss_lr", y_ph.shape(), m_ph.shape());
  return ops::mean(ops::abs(y_ph - y_ph.tape().constant(m_ph)));
}

TotalLoss loss_total(const LossParts& parts, const LossToggles& toggles) {
  TotalLoss out;
  auto include = [&](const std::optional<Var>& part, bool enabled, double& slot) {
    if (!enabled || !part) return;
    slot = part->value().item();
    out.total = out.total ? *out.total + *part : *part;
  };
  include(parts.pixel, true, out.breakdown.l_pixel);
  include(parts.sp, toggles.sp, out.breakdown.l_sp);
  include(parts.scribble, toggles.bme, out.breakdown.l_scribble);
  include(parts.lr, toggles.lr, out.breakdown.l_lr);
  out.breakdown.l_total = out.total ? out.total->value().item() : 0.0;
  return out;
}

void FusionSpec::validate() const {
  const bool ok = mode == Mode::Fixed ? (lambda >= 0.0 && lambda <= 1.0)
                                      : (lo >= 0.0 && hi <= 1.0 && lo <= hi);
  if (!ok) throw std::invalid_argument("fusion weight must lie in [0, 1]");
}

double FusionSpec::draw(Rng& rng) const {
  return mode == Mode::Fixed ? lambda : uniform(rng, lo, hi);
}

}  // namespace mixseg::losses
