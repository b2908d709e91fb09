#include "mixseg/augment.hpp"

#include <algorithm>

namespace mixseg {

std::pair<std::size_t, std::size_t> Transform::map(std::size_t y, std::size_t x, std::size_t h,
                                                   std::size_t w) const {
  if (hflip) x = w - 1 - x;
  if (vflip) y = h - 1 - y;
  for (int i = 0; i < ((quarter_turns % 4) + 4) % 4; ++i) {
    // Clockwise: (y, x) in h x w -> (x, h - 1 - y) in w x h.
    const std::size_t ny = x, nx = h - 1 - y;
    y = ny;
    x = nx;
    std::swap(h, w);
  }
  return {y, x};
}

std::pair<std::size_t, std::size_t> Transform::frame(std::size_t h, std::size_t w) const {
  return (quarter_turns % 2) ? std::pair{w, h} : std::pair{h, w};
}

Transform draw_transform(Rng& rng, std::size_t h, std::size_t w) {
  Transform t;
  t.hflip = bernoulli(rng, 0.5);
  t.vflip = bernoulli(rng, 0.5);
  t.quarter_turns = h == w ? static_cast<int>(uniform_index(rng, 4))
                           : 2 * static_cast<int>(uniform_index(rng, 2));
  return t;
}

Tensor apply(const Transform& t, const Tensor& image) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto [oh, ow] = t.frame(h, w);
  Tensor out({c, oh, ow});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto [ny, nx] = t.map(y, x, h, w);
      for (std::size_t ch = 0; ch < c; ++ch) out.at(ch, ny, nx) = image.at(ch, y, x);
    }
  }
  return out;
}

PixelMask apply(const Transform& t, const PixelMask& m) {
  const auto [oh, ow] = t.frame(m.height, m.width);
  PixelMask out(ow, oh);
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      const auto [ny, nx] = t.map(y, x, m.height, m.width);
      out.at(ny, nx) = m.at(y, x);
    }
  }
  return out;
}

ScribbleAnnotation apply(const Transform& t, const ScribbleAnnotation& s) {
  const auto [oh, ow] = t.frame(s.height, s.width);
  ScribbleAnnotation out(ow, oh);
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      const auto [ny, nx] = t.map(y, x, s.height, s.width);
      out.at(ny, nx) = s.at(y, x);
    }
  }
  return out;
}

BoxAnnotation apply(const Transform& t, const BoxAnnotation& b, std::size_t h, std::size_t w) {
  const auto [ay, ax] = t.map(static_cast<std::size_t>(b.y0), static_cast<std::size_t>(b.x0), h, w);
  const auto [by, bx] = t.map(static_cast<std::size_t>(b.y1), static_cast<std::size_t>(b.x1), h, w);
  return {static_cast<int>(std::min(ax, bx)), static_cast<int>(std::min(ay, by)),
          static_cast<int>(std::max(ax, bx)), static_cast<int>(std::max(ay, by))};
}

Sample apply(const Transform& t, const Sample& s) {
  Sample out;
  out.id = s.id;
  out.split = s.split;
  out.image = apply(t, s.image);
  out.truth = apply(t, s.truth);
  const std::size_t h = s.height(), w = s.width();
  out.annotation = std::visit(
      [&](const auto& a) -> Annotation {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, BoxAnnotation>) {
          return apply(t, a, h, w);
        } else {
          return apply(t, a);
        }
      },
      s.annotation);
  return out;
}

Sample augment(const Sample& s, Rng& rng) { return apply(draw_transform(rng, s.height(), s.width()), s); }

}  // namespace mixseg
