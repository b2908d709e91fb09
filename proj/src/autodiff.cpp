#include "mixseg/autodiff.hpp"

#include <stdexcept>

namespace mixseg {

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw std::logic_error("operand recorded on a different tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor* Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.has_grad ? &n.grad : nullptr;
}

Tensor* Tape::grad_sink(Var input) {
  Node& n = nodes_[input.id()];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw std::logic_error("backward root from a different tape");
  if (root.numel() != 1) {
    throw ShapeError("backward requires a scalar root, got " + shape_str(root.shape()));
  }
  zero_grad();
  visits_ = 0;
  if (!nodes_[root.id()].requires_grad) return;
  *grad_sink(root) = Tensor(root.shape(), 1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    ++visits_;
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

}  // namespace mixseg
