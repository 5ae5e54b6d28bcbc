#include "mspc/autodiff.hpp"

namespace mspc {

template <class T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <class T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

template <class T>
Var<T> Tape<T>::parameter(const Parameter<T>& p, bool trainable) {
  Node n;
  n.value = p.value;
  n.requires_grad = trainable;
  n.param = trainable ? &p : nullptr;
  return push(std::move(n));
}

template <class T>
Var<T> Tape<T>::detach(Var<T> v) {
  MSPC_REQUIRE(&v.tape() == this, "detach: variable belongs to another tape");
  return constant(v.value());
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var<T>>(inputs), std::move(fn));
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    MSPC_REQUIRE(&in.tape() == this, "op inputs must live on the same tape");
    n.requires_grad = n.requires_grad || requires_grad(in.id());
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <class T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value.shape(), T(0));
    n.has_grad = true;
  }
  return n.grad;
}

template <class T>
GradientMap<T> Tape<T>::backward(Var<T> loss) {
  MSPC_REQUIRE(loss.valid() && &loss.tape() == this, "backward: loss is not on this tape");
  MSPC_REQUIRE(loss.value().size() == 1, "backward: loss must be a scalar, got shape " + shape_str(loss.shape()));

  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>();
  }
  grad_buffer(loss.id()).fill(T(1));

  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }

  GradientMap<T> out;
  for (auto& n : nodes_) {
    if (!n.param) continue;
    auto it = out.find(n.param);
    if (it == out.end()) it = out.emplace(n.param, Tensor<T>(n.value.shape(), T(0))).first;
    if (n.has_grad) it->second += n.grad;
  }
  return out;
}

template <class T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id())];
  if (n.has_grad) return n.grad;
  return Tensor<T>(n.value.shape(), T(0));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mspc
