#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mixseg/rng.hpp"
#include "mixseg/tensor.hpp"

namespace mixseg {

class AnnotationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Binary per-pixel mask, row-major, values in {0, 1}.
struct PixelMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> values;

  PixelMask() = default;
  PixelMask(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), values(w * h, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t foreground_count() const;
  /// [H, W] tensor of 0.0 / 1.0.
  Tensor to_tensor() const;
  bool operator==(const PixelMask&) const = default;
};

/// Inclusive pixel rectangle.
struct BoxAnnotation {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  std::size_t area() const {
    return static_cast<std::size_t>(x1 - x0 + 1) * static_cast<std::size_t>(y1 - y0 + 1);
  }
  bool operator==(const BoxAnnotation&) const = default;
};

enum class ScribbleCode : std::uint8_t { Unlabeled = 0, Background = 1, Foreground = 2 };

/// Sparse labels: scribbled pixels form S, the rest form U.
struct ScribbleAnnotation {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<ScribbleCode> codes;

  ScribbleAnnotation() = default;
  ScribbleAnnotation(std::size_t w, std::size_t h)
      : width(w), height(h), codes(w * h, ScribbleCode::Unlabeled) {}

  ScribbleCode& at(std::size_t y, std::size_t x) { return codes[y * width + x]; }
  ScribbleCode at(std::size_t y, std::size_t x) const { return codes[y * width + x]; }
  std::size_t labeled_count() const;
  std::size_t count(ScribbleCode c) const;
  bool operator==(const ScribbleAnnotation&) const = default;
};

using Annotation = std::variant<PixelMask, BoxAnnotation, ScribbleAnnotation>;

enum class AnnotationKind { Pixel, Box, Scribble };
enum class Split { Train, Test };

std::string to_string(AnnotationKind k);
std::string to_string(Split s);
AnnotationKind parse_kind(const std::string& s);
Split parse_split(const std::string& s);

struct Sample {
  std::string id;
  Split split = Split::Train;
  Tensor image;  ///< [3, H, W] in [0, 1]
  Annotation annotation;
  PixelMask truth;  ///< evaluation only; losses never read it

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }
  AnnotationKind kind() const { return static_cast<AnnotationKind>(annotation.index()); }
  bool operator==(const Sample&) const = default;
};

/// Tightest rectangle around the foreground. Throws on an empty mask.
BoxAnnotation mask_to_box(const PixelMask& m);

/// Rectangle raster. Throws if the box leaves the w x h frame or is inverted.
PixelMask box_to_mask(const BoxAnnotation& b, std::size_t w, std::size_t h);

void validate_box(const BoxAnnotation& b, std::size_t w, std::size_t h);

/// Random-walk scribbles: one stroke from the foreground centroid confined
/// to the foreground, one from a random background pixel confined to the
/// background, each covering about `coverage` of its class.
ScribbleAnnotation mask_to_scribble(const PixelMask& m, double coverage, Rng& rng);

}  // namespace mixseg
