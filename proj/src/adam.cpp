#include "mspc/adam.hpp"

#include <cmath>

namespace mspc {

template <class T>
void adam_step(std::span<Parameter<T>* const> params, const GradientMap<T>& grads, AdamState<T>& state) {
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->value.shape(), T(0));
      state.second_moment.emplace_back(p->value.shape(), T(0));
    }
  }
  MSPC_REQUIRE(state.first_moment.size() == params.size(),
               "adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                   std::to_string(params.size()));

  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);

  for (size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    MSPC_REQUIRE(m.shape() == p.value.shape(), "adam_step: moment shape mismatch for " + p.name);
    auto it = grads.find(&p);
    const Tensor<T>* g = it == grads.end() ? nullptr : &it->second;
    MSPC_REQUIRE(!g || g->shape() == p.value.shape(),
                 "adam_step: gradient shape " + shape_str(g ? g->shape() : Shape{}) + " does not match parameter " +
                     p.name + " " + shape_str(p.value.shape()));
    for (size_t i = 0; i < p.value.size(); ++i) {
      const T gi = g ? (*g)[i] : T(0);
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step(std::span<Parameter<float>* const>, const GradientMap<float>&, AdamState<float>&);
template void adam_step(std::span<Parameter<double>* const>, const GradientMap<double>&, AdamState<double>&);

}  // namespace mspc
