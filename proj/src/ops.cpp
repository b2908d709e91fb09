#include "mixseg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace mixseg::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

const char* name_of(Binary k) {
  switch (k) {
    case Binary::Add: return "add";
    case Binary::Sub: return "sub";
    case Binary::Mul: return "mul";
    case Binary::Div: return "div";
    case Binary::Min: return "min";
  }
  return "?";
}

double apply(Binary k, double a, double b) {
  switch (k) {
    case Binary::Add: return a + b;
    case Binary::Sub: return a - b;
    case Binary::Mul: return a * b;
    case Binary::Div: return a / b;
    case Binary::Min: return a <= b ? a : b;
  }
  return 0.0;
}

// Partial derivatives of apply(k, a, b) w.r.t. a and b.
std::pair<double, double> partials(Binary k, double a, double b) {
  switch (k) {
    case Binary::Add: return {1.0, 1.0};
    case Binary::Sub: return {1.0, -1.0};
    case Binary::Mul: return {b, a};
    case Binary::Div: return {1.0 / b, -a / (b * b)};
    case Binary::Min: return a <= b ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0};
  }
  return {0.0, 0.0};
}

// Half-pixel-centre sampling taps along one axis.
struct Tap {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    const double frac = src - static_cast<double>(i0);
    taps[d] = {i0, i1, 1.0 - frac, frac};
  }
  return taps;
}

struct ResizeGeometry {
  std::size_t channels, in_h, in_w, out_h, out_w;
};

ResizeGeometry resize_geometry(const Shape& s, std::size_t out_h, std::size_t out_w) {
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("upsample_bilinear expects [C,h,w] or [h,w], got " + shape_str(s));
  }
  const std::size_t c = s.size() == 3 ? s[0] : 1;
  const std::size_t h = s[s.size() - 2];
  const std::size_t w = s[s.size() - 1];
  if (out_h < h || out_w < w || h == 0 || w == 0) {
    throw ShapeError("upsample_bilinear cannot shrink " + shape_str(s) + " to " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  return {c, h, w, out_h, out_w};
}

void resize_forward(const ResizeGeometry& g, const std::vector<Tap>& ty,
                    const std::vector<Tap>& tx, std::span<const double> in,
                    std::span<double> out) {
  std::vector<double> rows(g.in_h * g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* src = in.data() + c * g.in_h * g.in_w;
    for (std::size_t r = 0; r < g.in_h; ++r) {
      for (std::size_t x = 0; x < g.out_w; ++x) {
        const Tap& t = tx[x];
        rows[r * g.out_w + x] = t.w0 * src[r * g.in_w + t.i0] + t.w1 * src[r * g.in_w + t.i1];
      }
    }
    double* dst = out.data() + c * g.out_h * g.out_w;
    for (std::size_t y = 0; y < g.out_h; ++y) {
      const Tap& t = ty[y];
      for (std::size_t x = 0; x < g.out_w; ++x) {
        dst[y * g.out_w + x] = t.w0 * rows[t.i0 * g.out_w + x] + t.w1 * rows[t.i1 * g.out_w + x];
      }
    }
  }
}

void resize_adjoint(const ResizeGeometry& g, const std::vector<Tap>& ty,
                    const std::vector<Tap>& tx, std::span<const double> out_grad,
                    std::span<double> in_grad) {
  std::vector<double> rows(g.in_h * g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    std::fill(rows.begin(), rows.end(), 0.0);
    const double* go = out_grad.data() + c * g.out_h * g.out_w;
    for (std::size_t y = 0; y < g.out_h; ++y) {
      const Tap& t = ty[y];
      for (std::size_t x = 0; x < g.out_w; ++x) {
        rows[t.i0 * g.out_w + x] += t.w0 * go[y * g.out_w + x];
        rows[t.i1 * g.out_w + x] += t.w1 * go[y * g.out_w + x];
      }
    }
    double* gi = in_grad.data() + c * g.in_h * g.in_w;
    for (std::size_t r = 0; r < g.in_h; ++r) {
      for (std::size_t x = 0; x < g.out_w; ++x) {
        const Tap& t = tx[x];
        gi[r * g.in_w + t.i0] += t.w0 * rows[r * g.out_w + x];
        gi[r * g.in_w + t.i1] += t.w1 * rows[r * g.out_w + x];
      }
    }
  }
}

struct ConvGeometry {
  std::size_t c_in, h, w, c_out, k, stride, pad, out_h, out_w;
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
  std::size_t patch() const { return c_in * k * k; }
  std::size_t pixels() const { return out_h * out_w; }
};

// Unfolds x into a [C*k*k, out_h*out_w] matrix.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const double* xc = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        double* out = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                    static_cast<std::ptrdiff_t>(ky);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                      static_cast<std::ptrdiff_t>(kx);
            out[oy * g.out_w + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xc[iy * w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* x) {
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    double* xc = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        const double* in = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                    static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= h) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                      static_cast<std::ptrdiff_t>(kx);
            if (ix >= 0 && ix < w) xc[iy * w + ix] += in[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var elementwise(Binary kind, Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same(name_of(kind), av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = apply(kind, av[i], bv[i]);
  return a.tape().record(std::move(out), {a, b}, [kind, a, b](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor* ga = t.grad_sink(a);
    Tensor* gb = t.grad_sink(b);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const auto [da, db] = partials(kind, av[i], bv[i]);
      if (ga) (*ga)[i] += g[i] * da;
      if (gb) (*gb)[i] += g[i] * db;
    }
  });
}

Var elementwise(Binary kind, Var a, double b) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = apply(kind, av[i], b);
  return a.tape().record(std::move(out), {a}, [kind, a, b](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    Tensor* ga = t.grad_sink(a);
    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * partials(kind, av[i], b).first;
  });
}

Var elementwise(Unary kind, Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = av[i];
    switch (kind) {
      case Unary::Abs: out[i] = std::abs(v); break;
      case Unary::Neg: out[i] = -v; break;
      case Unary::Relu: out[i] = v > 0.0 ? v : 0.0; break;
    }
  }
  return a.tape().record(std::move(out), {a}, [kind, a](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    Tensor* ga = t.grad_sink(a);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const double v = av[i];
      double d = 0.0;
      switch (kind) {
        case Unary::Abs: d = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
        case Unary::Neg: d = -1.0; break;
        case Unary::Relu: d = v > 0.0 ? 1.0 : 0.0; break;
      }
      (*ga)[i] += g[i] * d;
    }
  });
}

Var sigmoid(Var a) {
  static const double lo = std::numeric_limits<double>::min();
  static const double hi = std::nextafter(1.0, 0.0);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double x = av[i];
    double y;
    if (x >= 0.0) {
      y = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      y = e / (1.0 + e);
    }
    out[i] = std::clamp(y, lo, hi);
  }
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor* ga = t.grad_sink(a);
    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var safe_log(Var a, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("safe_log: eps must be positive");
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(std::max(av[i], eps));
  return a.tape().record(std::move(out), {a}, [a, eps](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    Tensor* ga = t.grad_sink(a);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (av[i] >= eps) (*ga)[i] += g[i] / av[i];
    }
  });
}

Var axis_max(Var a, Axis axis) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw ShapeError("axis_max expects a 2-D tensor, got " + shape_str(av.shape()));
  const std::size_t h = av.dim(0), w = av.dim(1);
  const bool rows = axis == Axis::Rows;
  const std::size_t n_out = rows ? w : h;
  const std::size_t n_red = rows ? h : w;
  Tensor out(rows ? Shape{1, w} : Shape{h, 1});
  auto argmax = std::make_shared<std::vector<std::size_t>>(n_out);
  for (std::size_t o = 0; o < n_out; ++o) {
    std::size_t best = rows ? o : o * w;
    for (std::size_t r = 1; r < n_red; ++r) {
      const std::size_t idx = rows ? r * w + o : o * w + r;
      if (av[idx] > av[best]) best = idx;
    }
    (*argmax)[o] = best;
    out[o] = av[best];
  }
  return a.tape().record(std::move(out), {a}, [a, argmax](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_sink(a);
    for (std::size_t o = 0; o < g.numel(); ++o) (*ga)[(*argmax)[o]] += g[o];
  });
}

Var reduce(Var a, Reduction kind) {
  const Tensor& av = a.value();
  const std::size_t n = av.numel();
  if (kind == Reduction::Mean && n == 0) throw ShapeError("mean of an empty tensor");
  double s = 0.0;
  for (double v : av.data()) s += v;
  const double scale = kind == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
  return a.tape().record(Tensor::scalar(kind == Reduction::Mean ? s / static_cast<double>(n) : s),
                         {a}, [a, scale](Tape& t, const Tensor& g) {
                           Tensor* ga = t.grad_sink(a);
                           const double d = g[0] * scale;
                           for (double& v : ga->data()) v += d;
                         });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_sink(a);
    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
  });
}

Var conv2d(Var x, Var w, std::size_t stride, std::size_t pad, std::optional<Var> bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + shape_str(xv.shape()));
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3)) {
    throw ShapeError("conv2d weight must be [O,C,k,k], got " + shape_str(wv.shape()));
  }
  if (wv.dim(1) != xv.dim(0)) throw ShapeError("conv2d channel mismatch", xv.shape(), wv.shape());
  const std::size_t k = wv.dim(2);
  if (k % 2 == 0) throw ShapeError("conv2d kernel size must be odd, got " + std::to_string(k));
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  if (xv.dim(1) + 2 * pad < k || xv.dim(2) + 2 * pad < k) {
    throw ShapeError("conv2d kernel larger than padded input", xv.shape(), wv.shape());
  }
  ConvGeometry geo{xv.dim(0), xv.dim(1), xv.dim(2), wv.dim(0), k, stride, pad, 0, 0};
  geo.out_h = (geo.h + 2 * pad - k) / stride + 1;
  geo.out_w = (geo.w + 2 * pad - k) / stride + 1;
  if (bias && bias->shape() != Shape{geo.c_out}) {
    throw ShapeError("conv2d bias", bias->shape(), Shape{geo.c_out});
  }

  std::shared_ptr<std::vector<double>> cols;
  if (!geo.pointwise()) {
    cols = std::make_shared<std::vector<double>>(geo.patch() * geo.pixels());
    im2col(geo, xv.data().data(), cols->data());
  }
  const double* col_ptr = cols ? cols->data() : xv.data().data();

  Tensor out({geo.c_out, geo.out_h, geo.out_w});
  MapMat om(out.data().data(), geo.c_out, geo.pixels());
  ConstMapMat wm(wv.data().data(), geo.c_out, geo.patch());
  ConstMapMat cm(col_ptr, geo.patch(), geo.pixels());
  om.noalias() = wm * cm;
  if (bias) {
    const Tensor& bv = bias->value();
    for (std::size_t o = 0; o < geo.c_out; ++o) om.row(o).array() += bv[o];
  }

  auto backward = [x, w, bias, geo, cols](Tape& t, const Tensor& g) {
    ConstMapMat gm(g.data().data(), geo.c_out, geo.pixels());
    if (Tensor* gw = t.grad_sink(w)) {
      const double* cp = cols ? cols->data() : x.value().data().data();
      ConstMapMat cm(cp, geo.patch(), geo.pixels());
      MapMat(gw->data().data(), geo.c_out, geo.patch()).noalias() += gm * cm.transpose();
    }
    if (Tensor* gx = t.grad_sink(x)) {
      ConstMapMat wm(w.value().data().data(), geo.c_out, geo.patch());
      if (geo.pointwise()) {
        MapMat(gx->data().data(), geo.patch(), geo.pixels()).noalias() += wm.transpose() * gm;
      } else {
        RowMat dcols = wm.transpose() * gm;
        col2im(geo, dcols.data(), gx->data().data());
      }
    }
    if (bias) {
      if (Tensor* gb = t.grad_sink(*bias)) {
        // Plain loop: Eigen's vectorized sum peels to alignment, so its order
        // would depend on where the buffer happens to live.
        const std::size_t n = geo.pixels();
        for (std::size_t o = 0; o < geo.c_out; ++o) {
          const double* row = gm.data() + o * n;
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += row[i];
          (*gb)[o] += acc;
        }
      }
    }
  };
  if (bias) return x.tape().record(std::move(out), {x, w, *bias}, std::move(backward));
  return x.tape().record(std::move(out), {x, w}, std::move(backward));
}

Var upsample_bilinear(Var x, std::size_t out_h, std::size_t out_w) {
  const Shape& s = x.shape();
  const ResizeGeometry geo = resize_geometry(s, out_h, out_w);
  auto ty = std::make_shared<std::vector<Tap>>(bilinear_taps(geo.in_h, out_h));
  auto tx = std::make_shared<std::vector<Tap>>(bilinear_taps(geo.in_w, out_w));
  Shape out_shape = s.size() == 3 ? Shape{geo.channels, out_h, out_w} : Shape{out_h, out_w};
  Tensor out(out_shape);
  resize_forward(geo, *ty, *tx, x.value().data(), out.data());
  return x.tape().record(std::move(out), {x}, [x, geo, ty, tx](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) resize_adjoint(geo, *ty, *tx, g.data(), gx->data());
  });
}

Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const ResizeGeometry geo = resize_geometry(x.shape(), out_h, out_w);
  Tensor out(x.rank() == 3 ? Shape{geo.channels, out_h, out_w} : Shape{out_h, out_w});
  resize_forward(geo, bilinear_taps(geo.in_h, out_h), bilinear_taps(geo.in_w, out_w), x.data(),
                 out.data());
  return out;
}

}  // namespace mixseg::ops
