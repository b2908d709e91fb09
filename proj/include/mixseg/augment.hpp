#pragma once

#include "mixseg/annotations.hpp"

namespace mixseg {

/// Axis-aligned pixel permutation: optional flips, then `quarter_turns`
/// clockwise 90-degree rotations.
struct Transform {
  bool hflip = false;
  bool vflip = false;
  int quarter_turns = 0;

  /// Destination (y, x) for source (y, x) in an h x w frame.
  std::pair<std::size_t, std::size_t> map(std::size_t y, std::size_t x, std::size_t h,
                                          std::size_t w) const;
  /// Output frame (h, w).
  std::pair<std::size_t, std::size_t> frame(std::size_t h, std::size_t w) const;
};

/// Flip each axis with probability 0.5 and pick a rotation from
/// {0, 90, 180, 270}. Non-square frames only draw 0 or 180.
Transform draw_transform(Rng& rng, std::size_t h, std::size_t w);

Tensor apply(const Transform& t, const Tensor& image);
PixelMask apply(const Transform& t, const PixelMask& m);
ScribbleAnnotation apply(const Transform& t, const ScribbleAnnotation& s);
BoxAnnotation apply(const Transform& t, const BoxAnnotation& b, std::size_t h, std::size_t w);
Sample apply(const Transform& t, const Sample& s);

/// Random flip/rotation applied identically to image, annotation and truth.
Sample augment(const Sample& s, Rng& rng);

}  // namespace mixseg
