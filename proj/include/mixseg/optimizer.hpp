#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixseg/segnet.hpp"

namespace mixseg {

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& tensor)
      : std::runtime_error("non-finite gradient in '" + tensor + "'"), tensor_(tensor) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

/// Velocity buffers, one per parameter tensor.
struct MomentumState {
  std::vector<Tensor> velocity;

  static MomentumState zeros_like(const ModelParams& params);
  bool operator==(const MomentumState&) const = default;
};

/// Classic momentum: v <- mu * v + g; p <- p - lr * v.
/// Every gradient is checked before anything is modified.
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads,
                       std::span<Tensor> velocity, double lr, double momentum,
                       std::span<const std::string> names = {});

void sgd_momentum_step(ModelParams& params, std::span<const Tensor> grads, MomentumState& state,
                       double lr, double momentum);

}  // namespace mixseg
