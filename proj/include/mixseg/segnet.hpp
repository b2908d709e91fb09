#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixseg/autodiff.hpp"

namespace mixseg {

/// Encoder widths and input geometry. Stage i (1-based) emits features at
/// [H / 2^(i+1), W / 2^(i+1)].
struct EncoderConfig {
  std::array<std::size_t, 4> channels = {16, 32, 64, 128};
  std::size_t height = 96;
  std::size_t width = 96;
  /// Channel width shared by the decoder after the 1x1 unification convs.
  std::size_t decoder_width = 16;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

/// Learnable tensors addressed by stable names, in a fixed order.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(EncoderConfig cfg) : config_(cfg) {}

  const EncoderConfig& config() const { return config_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  std::span<const std::string> names() const { return names_; }

  void add(std::string name, Tensor t);
  bool all_finite() const;
  bool operator==(const ModelParams&) const = default;

 private:
  EncoderConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases. Each tensor
/// draws from a stream derived from (seed, name).
ModelParams init_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Parameters registered on a tape, parallel to ModelParams order.
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<Var> vars;

  Var operator[](const std::string& name) const { return vars[params->index_of(name)]; }
};

/// Registers every parameter as a gradient-tracking leaf (or as a constant
/// when trainable is false).
BoundParams bind(Tape& tape, const ModelParams& params, bool trainable = true);

struct Features {
  Var f1, f2, f3, f4;
  Var logits;  ///< [H, W]
};

/// Encoder plus decoder: f2..f4 pass 1x1 convs to decoder_width, are
/// resized to f2's resolution, multiplied, reduced to one channel by a
/// final 1x1 conv and resized to the input size. f1 is produced but unused.
Features forward_features(const BoundParams& p, Var image);
Var forward(const BoundParams& p, Var image);

/// Logits for one image without gradient tracking.
Tensor infer(const ModelParams& params, const Tensor& image);

}  // namespace mixseg
