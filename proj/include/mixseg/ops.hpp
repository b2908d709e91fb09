#pragma once

#include <optional>

#include "mixseg/autodiff.hpp"

namespace mixseg::ops {

inline constexpr double kLogEps = 1e-7;

enum class Binary { Add, Sub, Mul, Div, Min };
enum class Unary { Abs, Neg, Relu };
enum class Axis {
  Rows,  ///< collapse H: [H, W] -> [1, W], per-column max
  Cols,  ///< collapse W: [H, W] -> [H, 1], per-row max
};
enum class Reduction { Sum, Mean };

/// Elementwise binary op. Shapes must match exactly (no broadcasting).
/// Min routes the gradient to the smaller operand, the first one on ties.
Var elementwise(Binary kind, Var a, Var b);
Var elementwise(Binary kind, Var a, double b);
Var elementwise(Unary kind, Var a);

inline Var add(Var a, Var b) { return elementwise(Binary::Add, a, b); }
inline Var sub(Var a, Var b) { return elementwise(Binary::Sub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(Binary::Mul, a, b); }
inline Var div(Var a, Var b) { return elementwise(Binary::Div, a, b); }
inline Var min(Var a, Var b) { return elementwise(Binary::Min, a, b); }
inline Var add(Var a, double b) { return elementwise(Binary::Add, a, b); }
inline Var sub(Var a, double b) { return elementwise(Binary::Sub, a, b); }
inline Var mul(Var a, double b) { return elementwise(Binary::Mul, a, b); }
inline Var div(Var a, double b) { return elementwise(Binary::Div, a, b); }
inline Var abs(Var a) { return elementwise(Unary::Abs, a); }
inline Var neg(Var a) { return elementwise(Unary::Neg, a); }
inline Var relu(Var a) { return elementwise(Unary::Relu, a); }
/// s - a
inline Var rsub(double s, Var a) { return add(neg(a), s); }

/// Logistic function. Output clamped to the open interval (0, 1).
Var sigmoid(Var a);

/// log(max(a, eps)); gradient is zero where a < eps.
Var safe_log(Var a, double eps = kLogEps);

/// Max over one axis of a 2-D tensor. The gradient goes to the first
/// (lowest-index) maximal element of each slice.
Var axis_max(Var a, Axis axis);

Var reduce(Var a, Reduction kind);
inline Var sum(Var a) { return reduce(a, Reduction::Sum); }
inline Var mean(Var a) { return reduce(a, Reduction::Mean); }

Var reshape(Var a, Shape shape);

/// Cross-correlation of x [C_in, H, W] with w [C_out, C_in, k, k], k odd.
/// Optional bias has shape [C_out].
Var conv2d(Var x, Var w, std::size_t stride, std::size_t pad,
           std::optional<Var> bias = std::nullopt);

/// Bilinear resize of x [C, h, w] (or [h, w]) with half-pixel centres and
/// border clamping. Upsampling only.
Var upsample_bilinear(Var x, std::size_t out_h, std::size_t out_w);

/// Plain-tensor form of the bilinear resize, used for image-space work.
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace mixseg::ops

namespace mixseg {

inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::mul(a, b); }
inline Var operator/(Var a, Var b) { return ops::div(a, b); }
inline Var operator+(Var a, double b) { return ops::add(a, b); }
inline Var operator-(Var a, double b) { return ops::sub(a, b); }
inline Var operator*(Var a, double b) { return ops::mul(a, b); }
inline Var operator*(double b, Var a) { return ops::mul(a, b); }
inline Var operator/(Var a, double b) { return ops::div(a, b); }
inline Var operator-(double s, Var a) { return ops::rsub(s, a); }
inline Var operator-(Var a) { return ops::neg(a); }

}  // namespace mixseg
