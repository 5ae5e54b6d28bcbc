#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mspc/tensor.hpp"

namespace mspc {

/// A named trainable array owned by a network.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <class T>
using GradientMap = std::unordered_map<const Parameter<T>*, Tensor<T>>;

template <class T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape is alive.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int64_t dim(int axis) const { return value().dim(axis); }
  bool requires_grad() const;

  Tape<T>& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// Wengert list for reverse-mode differentiation.
///
/// Every primitive appends one node holding its output value and a closure
/// that pushes the output gradient to its inputs. Because nodes are appended
/// in evaluation order, walking the list backwards from the loss is a reverse
/// topological traversal; each node is visited once and input gradients are
/// accumulated additively.
///
/// A tape is single-threaded. Build a fresh one per forward pass.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out, const Tensor<T>& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> variable(Tensor<T> value);

  /// Registers a parameter as a leaf. Frozen parameters act as constants
  /// (gradients still flow *through* ops that use them, never *into* them).
  Var<T> parameter(const Parameter<T>& p, bool trainable);

  /// Same value, gradient flow stopped.
  Var<T> detach(Var<T> v);

  /// Appends an op output. `fn` is dropped when no input requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn);

  /// Runs the reverse sweep from a scalar loss and returns the gradient of
  /// every trainable parameter registered on this tape (zero when the loss
  /// does not depend on it). Parameters registered more than once receive
  /// the sum of their per-use gradients. May be called repeatedly.
  GradientMap<T> backward(Var<T> loss);

  /// Gradient of an arbitrary node from the most recent backward call.
  Tensor<T> grad(Var<T> v) const;

  const Tensor<T>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  /// Gradient buffer of node `id`, zero-allocated on first touch. Only valid
  /// inside a backward closure.
  Tensor<T>& grad_buffer(int id);

  size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    const Parameter<T>* param = nullptr;
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <class T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mspc
