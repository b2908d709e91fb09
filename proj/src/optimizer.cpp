#include "mixseg/optimizer.hpp"

namespace mixseg {

MomentumState MomentumState::zeros_like(const ModelParams& params) {
  MomentumState s;
  for (std::size_t i = 0; i < params.size(); ++i) s.velocity.emplace_back(params.tensor(i).shape(), 0.0);
  return s;
}

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads,
                       std::span<Tensor> velocity, double lr, double momentum,
                       std::span<const std::string> names) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_momentum_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string label = i < names.size() ? names[i] : "#" + std::to_string(i);
    if (grads[i].shape() != params[i].shape()) throw ShapeError("gradient of " + label, grads[i].shape(), params[i].shape());
    if (velocity[i].shape() != params[i].shape()) throw ShapeError("velocity of " + label, velocity[i].shape(), params[i].shape());
    if (!grads[i].all_finite()) throw NonFiniteGradient(label);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto v = velocity[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = momentum * v[k] + g[k];
      p[k] -= lr * v[k];
    }
  }
}

void sgd_momentum_step(ModelParams& params, std::span<const Tensor> grads, MomentumState& state,
                       double lr, double momentum) {
  sgd_momentum_step(params.tensors(), grads, state.velocity, lr, momentum, params.names());
}

}  // namespace mixseg
