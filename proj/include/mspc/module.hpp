#pragma once

#include <memory>
#include <vector>

#include "mspc/autodiff.hpp"

namespace mspc {

enum class ParamMode { Trainable, Frozen };

/// Anything with parameters that maps one tape value to another: the
/// translator, the discriminators, the grid predictor, and test stubs.
template <class T>
class Module {
 public:
  virtual ~Module() = default;

  /// Records the forward pass on `x`'s tape. With ParamMode::Frozen the
  /// parameters enter as constants, so gradients reach `x` but not them.
  virtual Var<T> forward(Var<T> x, ParamMode mode) const = 0;

  virtual std::vector<Parameter<T>*> parameters() = 0;
  virtual std::unique_ptr<Module<T>> clone() const = 0;

  std::vector<const Parameter<T>*> parameters() const {
    auto ps = const_cast<Module*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
  }

  /// Convenience: evaluate on a value without keeping the tape.
  Tensor<T> evaluate(const Tensor<T>& x) const {
    Tape<T> tape;
    return forward(tape.constant(x), ParamMode::Frozen).value();
  }
};

}  // namespace mspc
