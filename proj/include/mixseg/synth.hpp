#pragma once

#include <cstdint>
#include <vector>

#include "mixseg/annotations.hpp"

namespace mixseg {

/// Parameters of the synthetic polyp-like image generator.
struct SynthConfig {
  std::size_t height = 96;
  std::size_t width = 96;
  int min_blobs = 1;
  int max_blobs = 2;
  /// Ellipse semi-axes as fractions of min(height, width).
  double min_axis = 0.08;
  double max_axis = 0.24;
  /// Peak amplitude of the foreground surface texture.
  double texture = 0.06;
  /// Standard deviation of additive pixel noise.
  double noise = 0.04;
  /// Background clutter blobs that are not labelled foreground.
  int max_distractors = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Image and exact ellipse-union truth mask. The returned sample carries the
/// truth mask as its annotation; id and split are left for the caller.
/// Pixel values are multiples of 1/255 so 8-bit storage is lossless.
Sample gen_sample(const SynthConfig& cfg, Rng& rng);

struct CorpusCounts {
  std::size_t pixel = 60;
  std::size_t box = 200;
  std::size_t scribble = 200;
  std::size_t test = 100;
};

/// Full corpus. Sample i draws from its own stream derived from
/// (cfg.seed, i), so generation order does not matter.
std::vector<Sample> generate_corpus(const SynthConfig& cfg, const CorpusCounts& counts,
                                    double scribble_coverage = 0.03);

}  // namespace mixseg
