#pragma once

#include <optional>

#include "mixseg/annotations.hpp"
#include "mixseg/autodiff.hpp"

namespace mixseg::losses {

enum class Normalization { Sum, Mean };

/// Per-pixel binary cross-entropy -[m log y + (1 - m) log(1 - y)], logs
/// clamped at 1e-7.
Var bce_map(Var y, Var m);

/// Binary cross-entropy summed (or averaged) over all entries.
Var loss_bce(Var y, Var m, Normalization norm);

/// Soft Dice loss 1 - 2 sum(m y) / sum(m + y). When the denominator is
/// exactly zero both terms get +1, so two empty maps score 0.
Var loss_dice(Var y, Var m);

struct Projections {
  Var y_w;  ///< [1, W] column maxima of the prediction
  Var y_h;  ///< [H, 1] row maxima of the prediction
  Var m_w;  ///< [1, W] box column indicator
  Var m_h;  ///< [H, 1] box row indicator
};

/// Max-projects a probability map onto both axes alongside the matching
/// projections of the box raster.
Projections project_pair(Var y, const BoxAnnotation& box);

/// Box supervision through axis projections:
/// 0.5 [BCE(y_w, m_w) + BCE(y_h, m_h)] + 0.5 [Dice(y_w, m_w) + Dice(y_h, m_h)].
/// The value depends on y only through its per-axis maxima.
Var loss_sp(Var y, const BoxAnnotation& box, Normalization bce_norm = Normalization::Sum);

/// Per-pixel binary minimum entropy min(-log y, -log(1 - y)). The first
/// branch wins at y = 0.5.
Var loss_bme(Var y);

/// (sum of BME over unlabelled pixels + sum of BCE over scribbled pixels)
/// / (|U| + |S|). Throws AnnotationError when no pixel is scribbled.
Var loss_scribble(Var y, const ScribbleAnnotation& scribble);

/// lambda * a + (1 - lambda) * b.
Var linear_fuse(Var a, Var b, double lambda);
Tensor linear_fuse(const Tensor& a, const Tensor& b, double lambda);

/// Mean absolute difference between a hybrid prediction and its detached
/// pseudo-label.
Var loss_lr(Var y_ph, const Tensor& m_ph);

struct LossToggles {
  bool sp = true;
  bool bme = true;
  bool lr = true;
  bool operator==(const LossToggles&) const = default;
};

struct LossBreakdown {
  double l_pixel = 0.0;
  double l_sp = 0.0;
  double l_scribble = 0.0;
  double l_lr = 0.0;
  double l_total = 0.0;

  double component_sum() const { return l_pixel + l_sp + l_scribble + l_lr; }
};

/// Terms computed for one triplet; unset terms count as zero.
struct LossParts {
  std::optional<Var> pixel;
  std::optional<Var> sp;
  std::optional<Var> scribble;
  std::optional<Var> lr;
};

struct TotalLoss {
  std::optional<Var> total;  ///< unset when every term is absent
  LossBreakdown breakdown;
};

/// Unweighted sum of the enabled parts. A disabled part is left out even if
/// it was computed.
TotalLoss loss_total(const LossParts& parts, const LossToggles& toggles);

/// Fusion weight: fixed, or drawn uniformly per iteration.
struct FusionSpec {
  enum class Mode { Fixed, Uniform };
  double lambda = 0.5;
  Mode mode = Mode::Fixed;
  double lo = 0.3;
  double hi = 0.7;

  void validate() const;
  double draw(Rng& rng) const;
};

}  // namespace mixseg::losses
