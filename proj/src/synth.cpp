#include "mixseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace mixseg {
namespace {

struct Ellipse {
  double cy, cx, a, b, cos_t, sin_t;

  // Squared normalised radius; <= 1 inside.
  double q(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double u = (dx * cos_t + dy * sin_t) / a;
    const double v = (-dx * sin_t + dy * cos_t) / b;
    return u * u + v * v;
  }
};

Ellipse random_ellipse(Rng& rng, double h, double w, double lo, double hi, double margin) {
  const double base = std::min(h, w);
  const double theta = uniform(rng, 0.0, std::numbers::pi);
  Ellipse e{};
  e.cy = uniform(rng, margin * h, (1.0 - margin) * h);
  e.cx = uniform(rng, margin * w, (1.0 - margin) * w);
  e.a = uniform(rng, lo, hi) * base;
  e.b = uniform(rng, lo, hi) * base;
  e.cos_t = std::cos(theta);
  e.sin_t = std::sin(theta);
  return e;
}

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (height < 32 || width < 32) throw std::invalid_argument("SynthConfig: size must be >= 32");
  if (min_blobs < 0 || max_blobs < min_blobs) {
    throw std::invalid_argument("SynthConfig: empty blob count range");
  }
  if (!(min_axis > 0.0 && max_axis >= min_axis)) {
    throw std::invalid_argument("SynthConfig: empty axis range");
  }
  if (texture < 0.0 || noise < 0.0 || max_distractors < 0) {
    throw std::invalid_argument("SynthConfig: negative amplitude");
  }
}

Sample gen_sample(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t H = cfg.height, W = cfg.width;
  const double h = static_cast<double>(H), w = static_cast<double>(W);

  // Mucosa-like background with low-frequency shading and vignetting.
  const double bg[3] = {uniform(rng, 0.55, 0.75), uniform(rng, 0.28, 0.40), uniform(rng, 0.26, 0.38)};
  const double shade_amp = uniform(rng, 0.04, 0.14);
  const double fy = uniform(rng, 0.5, 1.5), fx = uniform(rng, 0.5, 1.5);
  const double p1 = uniform(rng, 0.0, 2 * std::numbers::pi), p2 = uniform(rng, 0.0, 2 * std::numbers::pi);
  const double vignette = uniform(rng, 0.10, 0.35);

  // Lesion appearance: a hue shift plus a dome-shaped brightness bulge.
  const double contrast = uniform(rng, 0.07, 0.16);
  const double sign = bernoulli(rng, 0.5) ? 1.0 : -1.0;
  const double fg_shift[3] = {contrast * 0.6 * sign + contrast * 0.5, -contrast * 0.4, -contrast * 0.2 * sign};
  const double dome = uniform(rng, 0.05, 0.15);
  const double tfy = uniform(rng, 0.12, 0.3), tfx = uniform(rng, 0.12, 0.3);
  const double tp = uniform(rng, 0.0, 2 * std::numbers::pi);

  const int blobs = uniform_int(rng, cfg.min_blobs, cfg.max_blobs);
  std::vector<Ellipse> lesions;
  for (int i = 0; i < blobs; ++i) {
    lesions.push_back(random_ellipse(rng, h, w, cfg.min_axis, cfg.max_axis, 0.15));
  }
  const int n_distract = cfg.max_distractors > 0 ? uniform_int(rng, 0, cfg.max_distractors) : 0;
  std::vector<Ellipse> distractors;
  std::vector<double> distract_shift;
  for (int i = 0; i < n_distract; ++i) {
    distractors.push_back(random_ellipse(rng, h, w, cfg.min_axis * 0.5, cfg.max_axis * 0.6, 0.05));
    distract_shift.push_back(uniform(rng, 0.04, 0.12) * (bernoulli(rng, 0.5) ? 1.0 : -1.0));
  }
  const int n_spec = uniform_int(rng, 0, 4);
  std::vector<Ellipse> speculars;
  for (int i = 0; i < n_spec; ++i) {
    speculars.push_back(random_ellipse(rng, h, w, 0.01, 0.03, 0.05));
  }

  Sample s;
  s.image = Tensor({3, H, W});
  s.truth = PixelMask(W, H);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
      const double ry = py / h - 0.5, rx = px / w - 0.5;
      const double shade = 1.0 + shade_amp * std::sin(2 * std::numbers::pi * fx * px / w + p1) *
                                     std::cos(2 * std::numbers::pi * fy * py / h + p2) -
                           vignette * (ry * ry + rx * rx) * 2.0;
      double q_min = 2.0;
      for (const auto& e : lesions) q_min = std::min(q_min, e.q(py, px));
      const bool fg = q_min <= 1.0;
      s.truth.at(y, x) = fg ? 1 : 0;

      double rgb[3];
      for (int c = 0; c < 3; ++c) rgb[c] = bg[c] * shade;
      if (fg) {
        const double bulge = 1.0 + dome * (1.0 - q_min);
        const double tex = cfg.texture * std::sin(2 * std::numbers::pi * (tfy * py + tfx * px) + tp);
        for (int c = 0; c < 3; ++c) rgb[c] = (rgb[c] + fg_shift[c]) * bulge + tex;
      } else {
        for (std::size_t d = 0; d < distractors.size(); ++d) {
          if (distractors[d].q(py, px) <= 1.0) {
            rgb[0] += distract_shift[d];
            rgb[1] += distract_shift[d] * 0.8;
            rgb[2] += distract_shift[d] * 0.5;
            break;
          }
        }
      }
      for (const auto& e : speculars) {
        if (e.q(py, px) <= 1.0) {
          for (double& v : rgb) v = 0.5 * v + 0.5 * 0.97;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb[c] + cfg.noise * normal(rng), 0.0, 1.0);
        s.image.at(static_cast<std::size_t>(c), y, x) = std::round(v * 255.0) / 255.0;
      }
    }
  }
  s.annotation = s.truth;
  return s;
}

std::vector<Sample> generate_corpus(const SynthConfig& cfg, const CorpusCounts& counts,
                                    double scribble_coverage) {
  cfg.validate();
  struct Slot {
    char prefix;
    std::size_t n;
    AnnotationKind kind;
    Split split;
  };
  const Slot slots[] = {{'p', counts.pixel, AnnotationKind::Pixel, Split::Train},
                        {'b', counts.box, AnnotationKind::Box, Split::Train},
                        {'s', counts.scribble, AnnotationKind::Scribble, Split::Train},
                        {'t', counts.test, AnnotationKind::Pixel, Split::Test}};
  std::vector<Sample> out;
  std::uint64_t stream = 0;
  for (const Slot& slot : slots) {
    for (std::size_t i = 0; i < slot.n; ++i, ++stream) {
      // Resample until the mask supports the annotation kind.
      for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 100) {
          throw std::runtime_error("generate_corpus: cannot produce a valid " +
                                   to_string(slot.kind) + " sample");
        }
        Rng rng(derive_seed(cfg.seed, stream * 1000 + attempt));
        Sample s = gen_sample(cfg, rng);
        const std::size_t fg = s.truth.foreground_count();
        const bool has_both = fg > 0 && fg < s.truth.values.size();
        if (slot.kind == AnnotationKind::Box) {
          if (fg == 0) continue;
          s.annotation = mask_to_box(s.truth);
        } else if (slot.kind == AnnotationKind::Scribble) {
          if (!has_both) continue;
          s.annotation = mask_to_scribble(s.truth, scribble_coverage, rng);
        }
        s.id = make_id(slot.prefix, i);
        s.split = slot.split;
        out.push_back(std::move(s));
        break;
      }
    }
  }
  return out;
}

}  // namespace mixseg
