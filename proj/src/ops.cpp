#include "mspc/ops.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"

namespace mspc::ops {
namespace {

template <class T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  MSPC_REQUIRE(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                           shape_str(b.shape()));
}

// [C,H,W] -> [C*k*k, Ho*Wo]
template <class T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* cols) {
  const int plane = ho * wo;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + static_cast<size_t>((ch * k + ki) * k + kj) * plane;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          T* out = row + oh * wo;
          if (ih < 0 || ih >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<size_t>(ch) * h + ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            out[ow] = (iw >= 0 && iw < w) ? src[iw] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into [C,H,W].
template <class T>
void col2im(const T* cols, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* x) {
  const int plane = ho * wo;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + static_cast<size_t>((ch * k + ki) * k + kj) * plane;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          T* dst = x + (static_cast<size_t>(ch) * h + ih) * w;
          const T* in = row + oh * wo;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) dst[iw] += in[ow];
          }
        }
      }
    }
  }
}

template <class T>
T softplus_scalar(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <class T>
T sigmoid_scalar(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same(a, b, "add");
  Tensor<T> out = a.value();
  out += b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    if (t.requires_grad(ia)) t.grad_buffer(ia) += g;
    if (t.requires_grad(ib)) t.grad_buffer(ib) += g;
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same(a, b, "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    if (t.requires_grad(ia)) t.grad_buffer(ia) += g;
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same(a, b, "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_buffer(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= factor;
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, factor](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    auto& ga = t.grad_buffer(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

template <class T>
Var<T> add_scalar(Var<T> a, T offset) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v += offset;
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) { t.grad_buffer(ia) += g; });
}

template <class T>
Var<T> neg(Var<T> a) {
  return scale(a, T(-1));
}

template <class T>
Var<T> sum(Var<T> a) {
  T s = 0;
  for (T v : a.value().data()) s += v;
  const int ia = a.id();
  return a.tape().record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    auto& ga = t.grad_buffer(ia);
    const T gv = g[0];
    for (auto& v : ga.data()) v += gv;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  T s = 0;
  for (T v : a.value().data()) s += v;
  const T n = static_cast<T>(a.value().size());
  const int ia = a.id();
  return a.tape().record(Tensor<T>::scalar(s / n), {a}, [ia, n](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    auto& ga = t.grad_buffer(ia);
    const T gv = g[0] / n;
    for (auto& v : ga.data()) v += gv;
  });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = v > 0 ? v : slope * v;
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, slope](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const auto& av = t.value(ia);
    auto& ga = t.grad_buffer(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += av[i] > 0 ? g[i] : slope * g[i];
  });
}

template <class T>
Var<T> tanh(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = std::tanh(v);
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>& y) {
    auto& ga = t.grad_buffer(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <class T>
Var<T> softplus(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = softplus_scalar(v);
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const auto& av = t.value(ia);
    auto& ga = t.grad_buffer(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid_scalar(av[i]);
  });
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const int ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    auto& ga = t.grad_buffer(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  MSPC_REQUIRE(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  const int rank = static_cast<int>(first.size());
  if (axis < 0) axis += rank;
  MSPC_REQUIRE(axis >= 0 && axis < rank, "concat: axis out of range");
  Shape out_shape = first;
  out_shape[static_cast<size_t>(axis)] = 0;
  for (const auto& p : parts) {
    MSPC_REQUIRE(static_cast<int>(p.shape().size()) == rank, "concat: rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis)
        MSPC_REQUIRE(p.shape()[static_cast<size_t>(d)] == first[static_cast<size_t>(d)],
                     "concat: extent mismatch " + shape_str(p.shape()) + " vs " + shape_str(first));
    out_shape[static_cast<size_t>(axis)] += p.shape()[static_cast<size_t>(axis)];
  }
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= first[static_cast<size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= first[static_cast<size_t>(d)];
  const int64_t total = out_shape[static_cast<size_t>(axis)];

  Tensor<T> out(out_shape);
  std::vector<int> ids;
  std::vector<int64_t> offsets;
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t len = p.shape()[static_cast<size_t>(axis)];
    const auto& src = p.value();
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(src.ptr() + o * len * inner, len * inner, out.ptr() + (o * total + offset) * inner);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += len;
  }
  return parts[0].tape().record(std::move(out), parts, [ids, offsets, outer, inner, total, axis](Tape<T>& t,
                                                                                               const Tensor<T>& g,
                                                                                               const Tensor<T>&) {
    for (size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      auto& gp = t.grad_buffer(ids[k]);
      const int64_t len = gp.shape()[static_cast<size_t>(axis)];
      for (int64_t o = 0; o < outer; ++o) {
        const T* src = g.ptr() + (o * total + offsets[k]) * inner;
        T* dst = gp.ptr() + o * len * inner;
        for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
      }
    }
  });
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  MSPC_REQUIRE(a.value().rank() == 2 && b.value().rank() == 2 && a.dim(1) == b.dim(0),
               "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = static_cast<int>(a.dim(0)), k = static_cast<int>(a.dim(1)), n = static_cast<int>(b.dim(1));
  Tensor<T> out(Shape{m, n});
  detail::gemm(false, false, m, n, k, a.value().ptr(), b.value().ptr(), out.ptr(), false);
  const int ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, n, k](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    if (t.requires_grad(ia))
      detail::gemm(false, true, m, k, n, g.ptr(), t.value(ib).ptr(), t.grad_buffer(ia).ptr(), true);
    if (t.requires_grad(ib))
      detail::gemm(true, false, k, n, m, t.value(ia).ptr(), g.ptr(), t.grad_buffer(ib).ptr(), true);
  });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  MSPC_REQUIRE(x.value().rank() == 2 && weight.value().rank() == 2 && bias.value().rank() == 1,
               "linear: expected x [B,in], weight [out,in], bias [out]");
  const int batch = static_cast<int>(x.dim(0)), in = static_cast<int>(x.dim(1));
  const int outf = static_cast<int>(weight.dim(0));
  MSPC_REQUIRE(weight.dim(1) == in && bias.dim(0) == outf,
               "linear: shape mismatch x " + shape_str(x.shape()) + " weight " + shape_str(weight.shape()));
  Tensor<T> out(Shape{batch, outf});
  for (int bi = 0; bi < batch; ++bi) std::copy_n(bias.value().ptr(), outf, out.ptr() + bi * outf);
  detail::gemm(false, true, batch, outf, in, x.value().ptr(), weight.value().ptr(), out.ptr(), true);
  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, weight, bias}, [=](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    if (t.requires_grad(ix))
      detail::gemm(false, false, batch, in, outf, g.ptr(), t.value(iw).ptr(), t.grad_buffer(ix).ptr(), true);
    if (t.requires_grad(iw))
      detail::gemm(true, false, outf, in, batch, g.ptr(), t.value(ix).ptr(), t.grad_buffer(iw).ptr(), true);
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (int bi = 0; bi < batch; ++bi)
        for (int o = 0; o < outf; ++o) gb[static_cast<size_t>(o)] += g[static_cast<size_t>(bi * outf + o)];
    }
  });
}

template <class T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  MSPC_REQUIRE(xs.size() == 4 && ws.size() == 4 && ws[2] == ws[3] && ws[1] == xs[1] && bias.value().rank() == 1 &&
                   bias.dim(0) == ws[0],
               "conv2d: incompatible x " + shape_str(xs) + " weight " + shape_str(ws));
  MSPC_REQUIRE(stride >= 1 && pad >= 0, "conv2d: invalid stride/pad");
  const int batch = static_cast<int>(xs[0]), c = static_cast<int>(xs[1]), h = static_cast<int>(xs[2]),
            w = static_cast<int>(xs[3]);
  const int o = static_cast<int>(ws[0]), k = static_cast<int>(ws[2]);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  MSPC_REQUIRE(ho > 0 && wo > 0, "conv2d: kernel larger than padded input");
  const int ckk = c * k * k, plane = ho * wo;

  Tensor<T> out(Shape{batch, o, ho, wo});
  std::vector<T> cols(static_cast<size_t>(ckk) * plane);
  const T* bptr = bias.value().ptr();
  for (int b = 0; b < batch; ++b) {
    im2col(x.value().ptr() + static_cast<size_t>(b) * c * h * w, c, h, w, k, stride, pad, ho, wo, cols.data());
    T* ob = out.ptr() + static_cast<size_t>(b) * o * plane;
    for (int oc = 0; oc < o; ++oc) std::fill(ob + oc * plane, ob + (oc + 1) * plane, bptr[oc]);
    detail::gemm(false, false, o, plane, ckk, weight.value().ptr(), cols.data(), ob, true);
  }

  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, weight, bias}, [=](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw), need_b = t.requires_grad(ib);
    std::vector<T> buf(static_cast<size_t>(ckk) * plane);
    const T* xv = t.value(ix).ptr();
    const T* wv = t.value(iw).ptr();
    for (int b = 0; b < batch; ++b) {
      const T* gb = g.ptr() + static_cast<size_t>(b) * o * plane;
      if (need_w) {
        im2col(xv + static_cast<size_t>(b) * c * h * w, c, h, w, k, stride, pad, ho, wo, buf.data());
        detail::gemm(false, true, o, ckk, plane, gb, buf.data(), t.grad_buffer(iw).ptr(), true);
      }
      if (need_b) {
        auto& gbias = t.grad_buffer(ib);
        for (int oc = 0; oc < o; ++oc) {
          T s = 0;
          for (int i = 0; i < plane; ++i) s += gb[oc * plane + i];
          gbias[static_cast<size_t>(oc)] += s;
        }
      }
      if (need_x) {
        detail::gemm(true, false, ckk, plane, o, wv, gb, buf.data(), false);
        col2im(buf.data(), c, h, w, k, stride, pad, ho, wo,
               t.grad_buffer(ix).ptr() + static_cast<size_t>(b) * c * h * w);
      }
    }
  });
}

template <class T>
Var<T> conv_transpose2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  MSPC_REQUIRE(xs.size() == 4 && ws.size() == 4 && ws[2] == ws[3] && ws[0] == xs[1] && bias.value().rank() == 1 &&
                   bias.dim(0) == ws[1],
               "conv_transpose2d: incompatible x " + shape_str(xs) + " weight " + shape_str(ws));
  MSPC_REQUIRE(stride >= 1 && pad >= 0, "conv_transpose2d: invalid stride/pad");
  const int batch = static_cast<int>(xs[0]), cin = static_cast<int>(xs[1]), h = static_cast<int>(xs[2]),
            w = static_cast<int>(xs[3]);
  const int cout = static_cast<int>(ws[1]), k = static_cast<int>(ws[2]);
  const int ho = (h - 1) * stride - 2 * pad + k, wo = (w - 1) * stride - 2 * pad + k;
  MSPC_REQUIRE(ho > 0 && wo > 0, "conv_transpose2d: empty output");
  const int ckk = cout * k * k, plane_in = h * w, plane_out = ho * wo;

  Tensor<T> out(Shape{batch, cout, ho, wo});
  std::vector<T> cols(static_cast<size_t>(ckk) * plane_in);
  const T* bptr = bias.value().ptr();
  for (int b = 0; b < batch; ++b) {
    detail::gemm(true, false, ckk, plane_in, cin, weight.value().ptr(),
                 x.value().ptr() + static_cast<size_t>(b) * cin * plane_in, cols.data(), false);
    T* ob = out.ptr() + static_cast<size_t>(b) * cout * plane_out;
    for (int oc = 0; oc < cout; ++oc) std::fill(ob + oc * plane_out, ob + (oc + 1) * plane_out, bptr[oc]);
    col2im(cols.data(), cout, ho, wo, k, stride, pad, h, w, ob);
  }

  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, weight, bias}, [=](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw), need_b = t.requires_grad(ib);
    std::vector<T> buf(static_cast<size_t>(ckk) * plane_in);
    const T* xv = t.value(ix).ptr();
    const T* wv = t.value(iw).ptr();
    for (int b = 0; b < batch; ++b) {
      const T* gb = g.ptr() + static_cast<size_t>(b) * cout * plane_out;
      if (need_b) {
        auto& gbias = t.grad_buffer(ib);
        for (int oc = 0; oc < cout; ++oc) {
          T s = 0;
          for (int i = 0; i < plane_out; ++i) s += gb[oc * plane_out + i];
          gbias[static_cast<size_t>(oc)] += s;
        }
      }
      if (!need_x && !need_w) continue;
      im2col(gb, cout, ho, wo, k, stride, pad, h, w, buf.data());
      if (need_x)
        detail::gemm(false, false, cin, plane_in, ckk, wv, buf.data(),
                     t.grad_buffer(ix).ptr() + static_cast<size_t>(b) * cin * plane_in, true);
      if (need_w)
        detail::gemm(false, true, cin, ckk, plane_in, xv + static_cast<size_t>(b) * cin * plane_in, buf.data(),
                     t.grad_buffer(iw).ptr(), true);
    }
  });
}

template <class T>
Var<T> instance_norm(Var<T> x, T eps) {
  const auto& xs = x.shape();
  MSPC_REQUIRE(xs.size() == 4, "instance_norm: expected [B,C,H,W], got " + shape_str(xs));
  const int64_t planes = xs[0] * xs[1];
  const int64_t n = xs[2] * xs[3];
  Tensor<T> out(xs);
  std::vector<T> inv_std(static_cast<size_t>(planes));
  const T* xv = x.value().ptr();
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = xv + p * n;
    T mu = 0;
    for (int64_t i = 0; i < n; ++i) mu += src[i];
    mu /= static_cast<T>(n);
    T var = 0;
    for (int64_t i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(p)] = inv;
    T* dst = out.ptr() + p * n;
    for (int64_t i = 0; i < n; ++i) dst[i] = (src[i] - mu) * inv;
  }
  const int ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, inv_std, planes, n](Tape<T>& t, const Tensor<T>& g,
                                                                        const Tensor<T>& y) {
    const T* yv = y.ptr();
    T* gx = t.grad_buffer(ix).ptr();
    for (int64_t p = 0; p < planes; ++p) {
      const T* gp = g.ptr() + p * n;
      const T* yp = yv + p * n;
      T mg = 0, mgy = 0;
      for (int64_t i = 0; i < n; ++i) {
        mg += gp[i];
        mgy += gp[i] * yp[i];
      }
      mg /= static_cast<T>(n);
      mgy /= static_cast<T>(n);
      const T inv = inv_std[static_cast<size_t>(p)];
      T* dst = gx + p * n;
      for (int64_t i = 0; i < n; ++i) dst[i] += inv * (gp[i] - mg - yp[i] * mgy);
    }
  });
}

template <class T>
Var<T> l1_distance(Var<T> a, Var<T> b) {
  require_same(a, b, "l1_distance");
  const auto& av = a.value();
  const auto& bv = b.value();
  T s = 0;
  for (size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const T n = static_cast<T>(av.size());
  const int ia = a.id(), ib = b.id();
  return a.tape().record(Tensor<T>::scalar(s / n), {a, b}, [ia, ib, n](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    const T gv = g[0] / n;
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    T* ga = need_a ? t.grad_buffer(ia).ptr() : nullptr;
    T* gb = need_b ? t.grad_buffer(ib).ptr() : nullptr;
    for (size_t i = 0; i < av.size(); ++i) {
      const T d = av[i] - bv[i];
      const T s = d > 0 ? gv : (d < 0 ? -gv : T(0));
      if (ga) ga[i] += s;
      if (gb) gb[i] -= s;
    }
  });
}

template <class T>
GanTerms<T> gan_logistic_terms(Var<T> logits_real, Var<T> logits_fake) {
  // log s(z) = -softplus(-z), log(1 - s(z)) = -softplus(z)
  Var<T> real_term = mean(softplus(neg(logits_real)));
  Var<T> fake_sp = mean(softplus(logits_fake));
  GanTerms<T> out;
  out.d_loss = add(real_term, fake_sp);
  out.g_loss_saturating = neg(fake_sp);
  out.g_loss_nonsaturating = mean(softplus(neg(logits_fake)));
  return out;
}

#define MSPC_INSTANTIATE_OPS(T)                                               \
  template Var<T> add(Var<T>, Var<T>);                                        \
  template Var<T> sub(Var<T>, Var<T>);                                        \
  template Var<T> mul(Var<T>, Var<T>);                                        \
  template Var<T> scale(Var<T>, T);                                           \
  template Var<T> add_scalar(Var<T>, T);                                      \
  template Var<T> neg(Var<T>);                                                \
  template Var<T> sum(Var<T>);                                                \
  template Var<T> mean(Var<T>);                                               \
  template Var<T> leaky_relu(Var<T>, T);                                      \
  template Var<T> tanh(Var<T>);                                               \
  template Var<T> softplus(Var<T>);                                           \
  template Var<T> reshape(Var<T>, Shape);                                     \
  template Var<T> concat(const std::vector<Var<T>>&, int);                    \
  template Var<T> matmul(Var<T>, Var<T>);                                     \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                             \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                   \
  template Var<T> conv_transpose2d(Var<T>, Var<T>, Var<T>, int, int);         \
  template Var<T> instance_norm(Var<T>, T);                                   \
  template Var<T> l1_distance(Var<T>, Var<T>);                                \
  template GanTerms<T> gan_logistic_terms(Var<T>, Var<T>);

MSPC_INSTANTIATE_OPS(float)
MSPC_INSTANTIATE_OPS(double)

}  // namespace mspc::ops
