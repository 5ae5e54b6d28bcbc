#pragma once

#include <span>
#include <vector>

#include "mspc/autodiff.hpp"

namespace mspc {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  int64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place. Moments are
/// allocated on the first call; afterwards the parameter list must keep the
/// same order and shapes. A parameter absent from `grads` is updated with a
/// zero gradient.
template <class T>
void adam_step(std::span<Parameter<T>* const> params, const GradientMap<T>& grads, AdamState<T>& state);

}  // namespace mspc
