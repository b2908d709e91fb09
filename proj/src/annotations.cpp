#include "mixseg/annotations.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mixseg {

std::size_t PixelMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

Tensor PixelMask::to_tensor() const {
  Tensor t({height, width});
  for (std::size_t i = 0; i < values.size(); ++i) t[i] = values[i] ? 1.0 : 0.0;
  return t;
}

std::size_t ScribbleAnnotation::labeled_count() const {
  return codes.size() - count(ScribbleCode::Unlabeled);
}

std::size_t ScribbleAnnotation::count(ScribbleCode c) const {
  return static_cast<std::size_t>(std::count(codes.begin(), codes.end(), c));
}

std::string to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::Pixel: return "pixel";
    case AnnotationKind::Box: return "box";
    case AnnotationKind::Scribble: return "scribble";
  }
  return "?";
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

AnnotationKind parse_kind(const std::string& s) {
  if (s == "pixel") return AnnotationKind::Pixel;
  if (s == "box") return AnnotationKind::Box;
  if (s == "scribble") return AnnotationKind::Scribble;
  throw AnnotationError("unknown annotation kind '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw AnnotationError("unknown split '" + s + "'");
}

BoxAnnotation mask_to_box(const PixelMask& m) {
  int x0 = std::numeric_limits<int>::max(), y0 = x0, x1 = -1, y1 = -1;
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      x0 = std::min(x0, static_cast<int>(x));
      x1 = std::max(x1, static_cast<int>(x));
      y0 = std::min(y0, static_cast<int>(y));
      y1 = std::max(y1, static_cast<int>(y));
    }
  }
  if (x1 < 0) throw AnnotationError("mask_to_box: mask has no foreground");
  return {x0, y0, x1, y1};
}

void validate_box(const BoxAnnotation& b, std::size_t w, std::size_t h) {
  const bool ok = b.x0 >= 0 && b.y0 >= 0 && b.x0 <= b.x1 && b.y0 <= b.y1 &&
                  static_cast<std::size_t>(b.x1) < w && static_cast<std::size_t>(b.y1) < h;
  if (!ok) {
    throw AnnotationError("box (" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                          std::to_string(b.x1) + "," + std::to_string(b.y1) +
                          ") outside " + std::to_string(w) + "x" + std::to_string(h) + " frame");
  }
}

PixelMask box_to_mask(const BoxAnnotation& b, std::size_t w, std::size_t h) {
  validate_box(b, w, h);
  PixelMask m(w, h);
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) m.at(y, x) = 1;
  }
  return m;
}

namespace {

constexpr std::array<std::array<int, 2>, 8> kSteps = {
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}}};

// Walks inside pixels where mask == cls, marking `code`, until `target`
// distinct pixels are marked or the step budget runs out.
void random_walk(const PixelMask& m, std::uint8_t cls, std::size_t start, std::size_t target,
                 ScribbleCode code, ScribbleAnnotation& out, Rng& rng) {
  const auto w = static_cast<int>(m.width);
  const auto h = static_cast<int>(m.height);
  int y = static_cast<int>(start / m.width);
  int x = static_cast<int>(start % m.width);
  std::size_t marked = 0;
  auto mark = [&](int yy, int xx) {
    auto& c = out.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
    if (c == ScribbleCode::Unlabeled) {
      c = code;
      ++marked;
    }
  };
  mark(y, x);
  std::size_t dir = uniform_index(rng, kSteps.size());
  const std::size_t budget = 200 * target + 1000;
  for (std::size_t step = 0; step < budget && marked < target; ++step) {
    // Mostly keep heading; occasionally turn by one notch.
    const double u = uniform01(rng);
    if (u < 0.15) dir = (dir + 1) % 8;
    else if (u < 0.30) dir = (dir + 7) % 8;
    const int ny = y + kSteps[dir][0];
    const int nx = x + kSteps[dir][1];
    if (ny < 0 || ny >= h || nx < 0 || nx >= w ||
        m.at(static_cast<std::size_t>(ny), static_cast<std::size_t>(nx)) != cls) {
      dir = uniform_index(rng, kSteps.size());
      continue;
    }
    y = ny;
    x = nx;
    mark(y, x);
  }
}

}  // namespace

ScribbleAnnotation mask_to_scribble(const PixelMask& m, double coverage, Rng& rng) {
  if (!(coverage > 0.0 && coverage <= 0.2)) {
    throw AnnotationError("scribble coverage must be in (0, 0.2]");
  }
  const std::size_t fg = m.foreground_count();
  const std::size_t bg = m.values.size() - fg;
  if (fg == 0 || bg == 0) throw AnnotationError("mask_to_scribble: mask lacks one class");

  // Foreground pixel closest to the centroid.
  double cy = 0.0, cx = 0.0;
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (m.at(y, x)) {
        cy += static_cast<double>(y);
        cx += static_cast<double>(x);
      }
    }
  }
  cy /= static_cast<double>(fg);
  cx /= static_cast<double>(fg);
  std::size_t fg_start = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> bg_pixels;
  bg_pixels.reserve(bg);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (!m.values[i]) {
      bg_pixels.push_back(i);
      continue;
    }
    const double dy = static_cast<double>(i / m.width) - cy;
    const double dx = static_cast<double>(i % m.width) - cx;
    const double d = dy * dy + dx * dx;
    if (d < best) {
      best = d;
      fg_start = i;
    }
  }
  const std::size_t bg_start = bg_pixels[uniform_index(rng, bg_pixels.size())];

  auto target = [coverage](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(coverage * static_cast<double>(n))));
  };
  ScribbleAnnotation s(m.width, m.height);
  random_walk(m, 1, fg_start, target(fg), ScribbleCode::Foreground, s, rng);
  random_walk(m, 0, bg_start, target(bg), ScribbleCode::Background, s, rng);
  return s;
}

}  // namespace mixseg
