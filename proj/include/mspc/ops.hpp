#pragma once

#include <vector>

#include "mspc/autodiff.hpp"

// Differentiable primitives. Every function records exactly one node on the
// tape of its inputs (composites such as gan_logistic_terms record several).
// Shapes are checked eagerly; a mismatch throws ContractViolation.
namespace mspc::ops {

template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scale(Var<T> a, T factor);
template <class T> Var<T> add_scalar(Var<T> a, T offset);
template <class T> Var<T> neg(Var<T> a);

template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> mean(Var<T> a);

template <class T> Var<T> leaky_relu(Var<T> a, T slope = T(0.2));
template <class T> Var<T> tanh(Var<T> a);
/// log(1 + exp(a)), evaluated without overflow.
template <class T> Var<T> softplus(Var<T> a);

template <class T> Var<T> reshape(Var<T> a, Shape shape);
template <class T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);

/// [m,k] x [k,n] -> [m,n]
template <class T> Var<T> matmul(Var<T> a, Var<T> b);
/// x [B,in], weight [out,in], bias [out] -> [B,out]
template <class T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);

/// x [B,C,H,W], weight [O,C,k,k], bias [O]; square kernel, zero padding.
template <class T> Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int pad);
/// x [B,Cin,H,W], weight [Cin,Cout,k,k], bias [Cout];
/// output extent (H-1)*stride - 2*pad + k.
template <class T> Var<T> conv_transpose2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int pad);

/// Per-sample, per-channel normalization over the spatial extent (no affine).
template <class T> Var<T> instance_norm(Var<T> x, T eps = T(1e-5));

/// Mean absolute elementwise difference. The subgradient of |.| at 0 is 0.
template <class T> Var<T> l1_distance(Var<T> a, Var<T> b);

template <class T>
struct GanTerms {
  Var<T> d_loss;                ///< -[E log s(real) + E log(1 - s(fake))]
  Var<T> g_loss_saturating;     ///< E log(1 - s(fake))
  Var<T> g_loss_nonsaturating;  ///< -E log s(fake)
};

/// Logistic GAN objectives from raw discriminator logits, in softplus form.
template <class T> GanTerms<T> gan_logistic_terms(Var<T> logits_real, Var<T> logits_fake);

}  // namespace mspc::ops
