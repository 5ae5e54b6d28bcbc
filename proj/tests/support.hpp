#pragma once

// Shared helpers for the unit and acceptance tests: a central-difference
// gradient checker and a few tiny stand-in modules.

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "mspc/autodiff.hpp"
#include "mspc/module.hpp"
#include "mspc/networks.hpp"
#include "mspc/ops.hpp"
#include "mspc/spatial_transformer.hpp"

namespace mspc::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

template <class T>
Tensor<T> random_tensor_t(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return random_tensor(std::move(shape), rng, lo, hi).template cast<T>();
}

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheck {
  double rel_error = 0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8)
  double max_abs = 0;
};

/// Central differences with step h on every input entry.
inline GradCheck check_gradients(const ScalarFn& fn, std::vector<Tensor<double>> inputs, double h = 1e-5) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var<double> loss = fn(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor<double>>& ins) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : ins) vars.push_back(tape.constant(t));
    return fn(tape, vars).value().item();
  };
  double diff2 = 0, a2 = 0, n2 = 0, max_abs = 0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + h;
      const double up = eval(inputs);
      inputs[k][i] = orig - h;
      const double down = eval(inputs);
      inputs[k][i] = orig;
      const double num = (up - down) / (2 * h);
      const double ana = analytic[k][i];
      diff2 += (ana - num) * (ana - num);
      a2 += ana * ana;
      n2 += num * num;
      max_abs = std::max(max_abs, std::abs(ana - num));
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
  return {std::sqrt(diff2) / denom, max_abs};
}

/// Weighted sum with fixed random weights, so every output entry gets a
/// distinct upstream gradient.
inline Var<double> probe(Var<double> out, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var<double> w = out.tape().constant(random_tensor(out.shape(), rng));
  return ops::sum(ops::mul(out, w));
}

/// G stub that returns its input.
template <class T>
class IdentityModule final : public Module<T> {
 public:
  Var<T> forward(Var<T> x, ParamMode) const override { return x; }
  std::vector<Parameter<T>*> parameters() override { return {}; }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<IdentityModule>(*this); }
};

/// One 3x3 convolution followed by tanh; a cheap translator stand-in.
template <class T>
class TinyConvModule final : public Module<T> {
 public:
  TinyConvModule(int channels, uint64_t seed) {
    std::mt19937_64 rng(seed);
    conv_.weight = {"G.conv.weight", random_tensor_t<T>({channels, channels, 3, 3}, rng, -0.3, 0.3)};
    conv_.bias = {"G.conv.bias", random_tensor_t<T>({channels}, rng, -0.1, 0.1)};
    conv_.pad = 1;
  }
  Var<T> forward(Var<T> x, ParamMode mode) const override { return ops::tanh(conv_(x, mode)); }
  std::vector<Parameter<T>*> parameters() override { return {&conv_.weight, &conv_.bias}; }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<TinyConvModule>(*this); }

 private:
  Conv2d<T> conv_;
};

/// Single-parameter T: p = q * (1 + theta), a dilation about the centre
/// shared by every image in the batch.
template <class T>
class ScalarDilationT final : public Module<T> {
 public:
  ScalarDilationT(int K, T theta) : K_(K) { theta_ = {"T.theta", Tensor<T>({1}, theta)}; }

  Var<T> forward(Var<T> x, ParamMode mode) const override {
    Tape<T>& tape = x.tape();
    const int64_t B = x.dim(0);
    const Tensor<T> q = reference_grid<T>(K_);
    Var<T> th = tape.parameter(theta_, mode == ParamMode::Trainable);
    Tensor<T> out({B, K_, K_, 2});
    for (int64_t b = 0; b < B; ++b)
      for (size_t i = 0; i < q.size(); ++i) out[static_cast<size_t>(b) * q.size() + i] = q[i] * (T(1) + th.value()[0]);
    const int id = th.id();
    return tape.record(std::move(out), {th}, [id, q](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
      T s = 0;
      for (size_t i = 0; i < g.size(); ++i) s += g[i] * q[i % q.size()];
      t.grad_buffer(id)[0] += s;
    });
  }
  std::vector<Parameter<T>*> parameters() override { return {&theta_}; }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<ScalarDilationT>(*this); }

  T theta() const { return theta_.value[0]; }

 private:
  int K_;
  Parameter<T> theta_;
};

/// Always emits the same grid regardless of input.
template <class T>
class FixedGridT final : public Module<T> {
 public:
  explicit FixedGridT(DeformationGrid<T> grid) : grid_(std::move(grid)) {}
  Var<T> forward(Var<T> x, ParamMode) const override {
    std::vector<DeformationGrid<T>> gs(static_cast<size_t>(x.dim(0)), grid_);
    return x.tape().constant(stack_grids(gs));
  }
  std::vector<Parameter<T>*> parameters() override { return {}; }
  std::unique_ptr<Module<T>> clone() const override { return std::make_unique<FixedGridT>(*this); }

 private:
  DeformationGrid<T> grid_;
};

/// Small ModelSet around stub G / T and real (narrow) discriminators.
template <class T>
ModelSet<T> toy_models(std::unique_ptr<Module<T>> g, std::unique_ptr<Module<T>> t_net, int size = 16,
                       uint64_t seed = 3) {
  NetworkConfig cfg;
  cfg.image_size = size;
  cfg.base_width = 8;
  cfg.num_blocks = 0;
  ModelSet<T> m = build_models<T>(cfg, seed);
  m.translator = std::move(g);
  m.t_net = std::move(t_net);
  return m;
}

}  // namespace mspc::testing
