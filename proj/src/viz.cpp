#include "mixseg/viz.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mixseg/image_io.hpp"
#include "mixseg/metrics.hpp"

namespace mixseg {
namespace {

constexpr std::size_t kGap = 2;
constexpr double kTint[3] = {0.0, 1.0, 0.0};
constexpr double kAlpha = 0.5;

}  // namespace

Tensor overlay(const Tensor& image, const PixelMask& mask) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != mask.height || image.dim(2) != mask.width) {
    throw ShapeError("overlay", image.shape(), Shape{3, mask.height, mask.width});
  }
  Tensor out = image;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < mask.height; ++y) {
      for (std::size_t x = 0; x < mask.width; ++x) {
        if (mask.at(y, x)) out.at(c, y, x) = (1.0 - kAlpha) * image.at(c, y, x) + kAlpha * kTint[c];
      }
    }
  }
  return out;
}

Tensor triptych(const Tensor& image, const PixelMask& truth, const PixelMask& pred) {
  const Tensor panels[3] = {image, overlay(image, truth), overlay(image, pred)};
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor out({3, h, 3 * w + 2 * kGap});
  out.fill(1.0);
  for (std::size_t p = 0; p < 3; ++p) {
    const std::size_t x0 = p * (w + kGap);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) out.at(c, y, x0 + x) = panels[p].at(c, y, x);
      }
    }
  }
  return out;
}

std::vector<VizRow> export_viz(const ModelParams& params, const std::vector<Sample>& samples,
                               const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "dice.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + (out_dir / "dice.csv").string());
  csv << "id,dice\n";
  std::vector<VizRow> rows;
  for (const Sample& s : samples) {
    const PixelMask pred = predict_mask(params, s.image);
    const double dice = segmentation_scores(pred, s.truth).dice;
    write_ppm(out_dir / (s.id + ".ppm"), triptych(s.image, s.truth, pred));
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.17g\n", dice);
    csv << s.id << buf;
    rows.push_back({s.id, dice});
  }
  return rows;
}

}  // namespace mixseg
