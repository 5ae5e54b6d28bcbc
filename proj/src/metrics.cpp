#include "mspc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mspc/datasets.hpp"
#include "mspc/error.hpp"
#include "mspc/ops.hpp"
#include "mspc/spatial_transformer.hpp"

namespace mspc {

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  MSPC_REQUIRE(!a.empty() && !b.empty(), "wasserstein1_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Integrate |Fa^-1(u) - Fb^-1(u)| over the merged quantile breakpoints.
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double u = 0, total = 0;
  while (i < a.size() && j < b.size()) {
    const double next = std::min(static_cast<double>(i + 1) / na, static_cast<double>(j + 1) / nb);
    total += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if (static_cast<double>(i + 1) / na <= next) ++i;
    if (static_cast<double>(j + 1) / nb <= next) ++j;
  }
  return total;
}

namespace {

template <class T>
std::vector<double> project(const Tensor<T>& set, const std::vector<double>& dir) {
  const int64_t n = set.dim(0);
  const size_t d = set.size() / static_cast<size_t>(n);
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const T* row = set.ptr() + i * static_cast<int64_t>(d);
    double s = 0;
    for (size_t k = 0; k < d; ++k) s += static_cast<double>(row[k]) * dir[k];
    out[static_cast<size_t>(i)] = s;
  }
  return out;
}

template <class T>
size_t flat_dim(const Tensor<T>& set) {
  MSPC_REQUIRE(set.rank() >= 1 && set.dim(0) >= 1, "sliced_wasserstein: empty set");
  return set.size() / static_cast<size_t>(set.dim(0));
}

}  // namespace

template <class T>
double sliced_wasserstein(const Tensor<T>& set_a, const Tensor<T>& set_b,
                          const std::vector<std::vector<double>>& directions) {
  const size_t d = flat_dim(set_a);
  MSPC_REQUIRE(d == flat_dim(set_b), "sliced_wasserstein: dimension mismatch " + shape_str(set_a.shape()) + " vs " +
                                         shape_str(set_b.shape()));
  MSPC_REQUIRE(!directions.empty(), "sliced_wasserstein: no projections");
  double total = 0;
  for (const auto& dir : directions) {
    MSPC_REQUIRE(dir.size() == d, "sliced_wasserstein: projection has the wrong dimension");
    total += wasserstein1_1d(project(set_a, dir), project(set_b, dir));
  }
  return total / static_cast<double>(directions.size());
}

template <class T>
double sliced_wasserstein(const Tensor<T>& set_a, const Tensor<T>& set_b, int n_projections, uint64_t seed) {
  MSPC_REQUIRE(n_projections >= 1, "sliced_wasserstein: need at least one projection");
  const size_t d = flat_dim(set_a);
  MSPC_REQUIRE(d == flat_dim(set_b), "sliced_wasserstein: dimension mismatch " + shape_str(set_a.shape()) + " vs " +
                                         shape_str(set_b.shape()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> dirs(static_cast<size_t>(n_projections), std::vector<double>(d));
  for (auto& dir : dirs) {
    double n2 = 0;
    for (auto& v : dir) {
      v = normal(rng);
      n2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : dir) v *= inv;
  }
  return sliced_wasserstein(set_a, set_b, dirs);
}

namespace {

template <class T, class Fn>
Tensor<T> map_chunks(const Tensor<T>& images, int chunk, Fn fn) {
  MSPC_REQUIRE(images.rank() == 4, "expected images [N,C,H,W], got " + shape_str(images.shape()));
  MSPC_REQUIRE(chunk >= 1, "chunk must be positive");
  const int64_t n = images.dim(0);
  std::vector<Tensor<T>> parts;
  for (int64_t i = 0; i < n; i += chunk) {
    const int64_t c = std::min<int64_t>(chunk, n - i);
    parts.push_back(fn(slice_leading(images, i, c)));
  }
  // Concatenate along the leading axis.
  Shape shape = parts[0].shape();
  shape[0] = n;
  Tensor<T> out(shape);
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.ptr(), p.size(), out.ptr() + off);
    off += p.size();
  }
  return out;
}

template <class T>
Var<T> warp_by(Var<T> images, Var<T> grids) {
  return warp(images, densify(grids, static_cast<int>(images.dim(2)), static_cast<int>(images.dim(3))));
}

}  // namespace

template <class T>
Tensor<T> translate_all(const Module<T>& g, const Tensor<T>& images, int chunk) {
  return map_chunks(images, chunk, [&](const Tensor<T>& b) { return g.evaluate(b); });
}

template <class T>
Tensor<T> perturb_all(const Module<T>& t_net, const Tensor<T>& images, int chunk) {
  return map_chunks(images, chunk, [&](const Tensor<T>& b) {
    Tape<T> tape;
    Var<T> x = tape.constant(b);
    return warp_by(x, t_net.forward(x, ParamMode::Frozen)).value();
  });
}

template <class T>
double commutativity_residual(const Module<T>& g, const Module<T>& t_net, const Tensor<T>& batch_x) {
  Tape<T> tape;
  Var<T> x = tape.constant(batch_x);
  Var<T> grids = t_net.forward(x, ParamMode::Frozen);
  Var<T> gx = g.forward(x, ParamMode::Frozen);
  Var<T> gtx = g.forward(warp_by(x, grids), ParamMode::Frozen);
  return static_cast<double>(ops::l1_distance(warp_by(gx, grids), gtx).value().item());
}

AlignmentTable alignment_table(const Module<float>& g, const Module<float>& t_net, const Tensor<float>& X,
                               const Tensor<float>& Y, const EvalConfig& cfg) {
  const Tensor<float> tx = perturb_all(t_net, X);
  const Tensor<float> ty = perturb_all(t_net, Y);
  const Tensor<float> gx = translate_all(g, X);
  const Tensor<float> gtx = translate_all(g, tx);
  AlignmentTable t;
  t.x_y = sliced_wasserstein(X, Y, cfg.projections, cfg.seed);
  t.tx_ty = sliced_wasserstein(tx, ty, cfg.projections, cfg.seed);
  t.gx_y = sliced_wasserstein(gx, Y, cfg.projections, cfg.seed);
  t.gtx_ty = sliced_wasserstein(gtx, ty, cfg.projections, cfg.seed);
  return t;
}

GroundTruthError ground_truth_error(const Module<float>& g, const TaskDataset& data, double tau) {
  MSPC_REQUIRE(data.has_ground_truth(), "ground_truth_error: dataset '" + data.name + "' has no ground truth");
  const Tensor<float> out = translate_all(g, data.source);
  const int64_t n = data.source_count();
  const size_t per = out.size() / static_cast<size_t>(n);
  double l1 = 0;
  size_t hits = 0;
  for (int64_t i = 0; i < n; ++i) {
    const Tensor<float> truth = data.ground_truth(data.source_image(i));
    MSPC_REQUIRE(truth.size() == per, "ground_truth_error: ground truth has the wrong size");
    const float* o = out.ptr() + i * static_cast<int64_t>(per);
    for (size_t k = 0; k < per; ++k) {
      const double e = std::abs(static_cast<double>(o[k]) - static_cast<double>(truth.ptr()[k]));
      l1 += e;
      hits += e <= tau ? 1 : 0;
    }
  }
  const double total = static_cast<double>(per) * static_cast<double>(n);
  return {l1 / total, static_cast<double>(hits) / total};
}

#define MSPC_INSTANTIATE_METRICS(T)                                                                      \
  template double sliced_wasserstein(const Tensor<T>&, const Tensor<T>&, int, uint64_t);                 \
  template double sliced_wasserstein(const Tensor<T>&, const Tensor<T>&, const std::vector<std::vector<double>>&); \
  template Tensor<T> translate_all(const Module<T>&, const Tensor<T>&, int);                             \
  template Tensor<T> perturb_all(const Module<T>&, const Tensor<T>&, int);                               \
  template double commutativity_residual(const Module<T>&, const Module<T>&, const Tensor<T>&);

MSPC_INSTANTIATE_METRICS(float)
MSPC_INSTANTIATE_METRICS(double)

}  // namespace mspc
