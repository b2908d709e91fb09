#include "mixseg/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mixseg/ops.hpp"
#include "mixseg/rng.hpp"

namespace mixseg {

void EncoderConfig::validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw std::invalid_argument("EncoderConfig: input size must be a positive multiple of 32, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (std::any_of(channels.begin(), channels.end(), [](std::size_t c) { return c == 0; }) ||
      decoder_width == 0) {
    throw std::invalid_argument("EncoderConfig: channel widths must be positive");
  }
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

std::size_t ModelParams::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

Tensor& ModelParams::at(const std::string& name) { return tensors_[index_of(name)]; }
const Tensor& ModelParams::at(const std::string& name) const { return tensors_[index_of(name)]; }

void ModelParams::add(std::string name, Tensor t) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    throw std::invalid_argument("duplicate parameter '" + name + "'");
  }
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const Tensor& t) { return t.all_finite(); });
}

ModelParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p(cfg);
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    Rng rng(derive_seed(seed, name));
    const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
    Tensor w({out, in, k, k});
    for (double& v : w.data()) v = uniform(rng, -bound, bound);
    p.add(name + ".weight", std::move(w));
    p.add(name + ".bias", Tensor({out}, 0.0));
  };
  const auto& c = cfg.channels;
  conv("stem", c[0], 3, 3);
  conv("enc1", c[0], c[0], 3);
  conv("enc2", c[1], c[0], 3);
  conv("enc3", c[2], c[1], 3);
  conv("enc4", c[3], c[2], 3);
  conv("unify2", cfg.decoder_width, c[1], 1);
  conv("unify3", cfg.decoder_width, c[2], 1);
  conv("unify4", cfg.decoder_width, c[3], 1);
  conv("head", 1, cfg.decoder_width, 1);
  return p;
}

BoundParams bind(Tape& tape, const ModelParams& params, bool trainable) {
  BoundParams b{&params, {}};
  b.vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    b.vars.push_back(trainable ? tape.leaf(params.tensor(i)) : tape.constant(params.tensor(i)));
  }
  return b;
}

Features forward_features(const BoundParams& p, Var image) {
  const EncoderConfig& cfg = p.params->config();
  if (image.shape() != Shape{3, cfg.height, cfg.width}) {
    throw ShapeError("segnet forward", image.shape(), Shape{3, cfg.height, cfg.width});
  }
  auto block = [&](Var x, const std::string& name) {
    return ops::relu(ops::conv2d(x, p[name + ".weight"], 2, 1, p[name + ".bias"]));
  };
  auto pointwise = [&](Var x, const std::string& name) {
    return ops::conv2d(x, p[name + ".weight"], 1, 0, p[name + ".bias"]);
  };

  Features f;
  const Var stem = block(image, "stem");
  f.f1 = block(stem, "enc1");
  f.f2 = block(f.f1, "enc2");
  f.f3 = block(f.f2, "enc3");
  f.f4 = block(f.f3, "enc4");

  const std::size_t h2 = f.f2.shape()[1], w2 = f.f2.shape()[2];
  const Var u2 = pointwise(f.f2, "unify2");
  const Var u3 = ops::upsample_bilinear(pointwise(f.f3, "unify3"), h2, w2);
  const Var u4 = ops::upsample_bilinear(pointwise(f.f4, "unify4"), h2, w2);
  const Var fused = ops::mul(ops::mul(u2, u3), u4);
  const Var head = ops::upsample_bilinear(pointwise(fused, "head"), cfg.height, cfg.width);
  f.logits = ops::reshape(head, {cfg.height, cfg.width});
  return f;
}

Var forward(const BoundParams& p, Var image) { return forward_features(p, image).logits; }

Tensor infer(const ModelParams& params, const Tensor& image) {
  Tape tape;
  const BoundParams bound = bind(tape, params, false);
  return forward(bound, tape.constant(image)).value();
}

}  // namespace mixseg
