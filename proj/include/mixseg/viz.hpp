#pragma once

#include <filesystem>
#include <vector>

#include "mixseg/annotations.hpp"
#include "mixseg/segnet.hpp"

namespace mixseg {

/// Image with foreground pixels tinted green, [3, H, W].
Tensor overlay(const Tensor& image, const PixelMask& mask);

/// image | overlay(truth) | overlay(pred), side by side with 2-pixel white
/// separators.
Tensor triptych(const Tensor& image, const PixelMask& truth, const PixelMask& pred);

struct VizRow {
  std::string id;
  double dice = 0.0;
};

/// Writes `<id>.ppm` per sample plus `dice.csv` (id,dice) into out_dir.
std::vector<VizRow> export_viz(const ModelParams& params, const std::vector<Sample>& samples,
                               const std::filesystem::path& out_dir);

}  // namespace mixseg
