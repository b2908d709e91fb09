#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "mixseg/tensor.hpp"

namespace mixseg {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  bool requires_grad() const;
  /// Gradient accumulated by the last backward pass, or nullptr if this
  /// node received none.
  const Tensor* grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in execution order; backward() replays them in
/// reverse. Confined to one thread for a forward+backward pass.
class Tape {
 public:
  /// Receives the gradient of the node's output and distributes it to the
  /// inputs through Tape::grad_sink.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  /// Appends a computed node. It tracks gradients iff any input does; the
  /// backward closure is dropped otherwise.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  void backward(Var root);
  void zero_grad();

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor* grad(std::size_t id) const;

  /// Gradient buffer of an input node, allocated on first use; nullptr when
  /// the node does not track gradients.
  Tensor* grad_sink(Var input);

  std::size_t size() const { return nodes_.size(); }
  std::size_t last_backward_visits() const { return visits_; }
  /// Ids of the inputs recorded for a node (audit support).
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  // deque keeps references to earlier nodes stable while new ones append.
  std::deque<Node> nodes_;
  std::size_t visits_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }
inline const Tensor* Var::grad() const { return tape_->grad(id_); }

}  // namespace mixseg
