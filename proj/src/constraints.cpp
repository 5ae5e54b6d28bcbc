#include "mspc/constraints.hpp"

#include <cmath>

#include "mspc/ops.hpp"

namespace mspc {
namespace {

template <class T>
T sgn(T v) {
  return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0));
}

void require_batched_grid(const Shape& s, const char* op) {
  MSPC_REQUIRE(s.size() == 4 && s[1] == s[2] && s[3] == 2 && s[1] >= 2,
               std::string(op) + ": grids must be [B,K,K,2] with K >= 2, got " + shape_str(s));
}

}  // namespace

PenaltyForm parse_penalty_form(const std::string& name) {
  if (name == "hinge") return PenaltyForm::Hinge;
  if (name == "literal_r4") return PenaltyForm::LiteralR4;
  throw ConfigError("unknown translation_penalty '" + name + "' (expected hinge or literal_r4)");
}

std::string to_string(PenaltyForm form) { return form == PenaltyForm::Hinge ? "hinge" : "literal_r4"; }

void ConstraintConfig::validate() const {
  if (!(a > 1.0) || !std::isfinite(a)) throw ConfigError("constraint.a must exceed 1, got " + std::to_string(a));
  if (!(b_trans >= 0.0 && b_trans <= 1.0))
    throw ConfigError("constraint.b_trans must lie in [0, 1], got " + std::to_string(b_trans));
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw ConfigError("constraint.weight must be non-negative, got " + std::to_string(weight));
}

template <class T>
std::vector<T> pairwise_scale_ratios(const DeformationGrid<T>& grid) {
  MSPC_REQUIRE(grid.K >= 2, "pairwise_scale_ratios: K must be at least 2");
  const Tensor<T> q = grid.reference();
  const int n = grid.K * grid.K;
  std::vector<T> out;
  out.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const size_t a = static_cast<size_t>(2 * i), b = static_cast<size_t>(2 * j);
      const T dp = std::hypot(grid.points[a] - grid.points[b], grid.points[a + 1] - grid.points[b + 1]);
      const T dq = std::hypot(q[a] - q[b], q[a + 1] - q[b + 1]);
      out.push_back(dp / dq);
    }
  return out;
}

bool FeasibilityReport::feasible() const { return violated_count() == 0; }

size_t FeasibilityReport::violated_count() const {
  size_t n = 0;
  for (bool ok : scale_ok) n += ok ? 0 : 1;
  for (bool ok : translation_ok) n += ok ? 0 : 1;
  return n;
}

template <class T>
FeasibilityReport feasibility_report(const DeformationGrid<T>& grid, const ConstraintConfig& cfg) {
  FeasibilityReport rep;
  const T lo = static_cast<T>(1.0 / cfg.a), hi = static_cast<T>(cfg.a);
  for (T r : pairwise_scale_ratios(grid)) {
    const T viol = r > hi ? r - hi : (r < lo ? lo - r : T(0));
    rep.scale_ok.push_back(viol == T(0));
    rep.scale_violation.push_back(static_cast<double>(viol));
  }
  // Same arithmetic as translation_penalty so the two agree at the boundary.
  const Tensor<T> q = grid.reference();
  const int n = grid.K * grid.K;
  const T bound = static_cast<T>(cfg.b_trans);
  for (int axis = 0; axis < 2; ++axis) {
    T s = 0, sq = 0;
    for (int k = 0; k < n; ++k) {
      s += grid.points[static_cast<size_t>(2 * k + axis)];
      sq += q[static_cast<size_t>(2 * k + axis)];
    }
    const T m = (s - sq) / static_cast<T>(n);
    const T viol = std::max(std::abs(m) - bound, T(0));
    rep.translation_ok[static_cast<size_t>(axis)] = viol == T(0);
    rep.translation_violation[static_cast<size_t>(axis)] = static_cast<double>(viol);
  }
  return rep;
}

template <class T>
Var<T> scale_penalty(Var<T> grids, double a, PenaltyForm form) {
  require_batched_grid(grids.shape(), "scale_penalty");
  const int64_t batch = grids.dim(0);
  const int K = static_cast<int>(grids.dim(1));
  const int n = K * K;
  const int pairs = n * (n - 1) / 2;
  const Tensor<T> q = reference_grid<T>(K);
  const T hi = static_cast<T>(a), lo = static_cast<T>(1.0 / a);
  const T norm = T(1) / (static_cast<T>(batch) * static_cast<T>(pairs));

  // d(penalty)/d(ratio) per (batch, pair), kept for the backward pass.
  std::vector<T> slope(static_cast<size_t>(batch * pairs));
  const T* p = grids.value().ptr();
  T total = 0;
  for (int64_t b = 0; b < batch; ++b) {
    const T* pb = p + b * n * 2;
    int idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++idx) {
        const T dp = std::hypot(pb[2 * i] - pb[2 * j], pb[2 * i + 1] - pb[2 * j + 1]);
        const T dq = std::hypot(q[static_cast<size_t>(2 * i)] - q[static_cast<size_t>(2 * j)],
                                q[static_cast<size_t>(2 * i + 1)] - q[static_cast<size_t>(2 * j + 1)]);
        const T r = dp / dq;
        T term;
        if (form == PenaltyForm::Hinge)
          term = std::max(r - hi, T(0)) + std::max(lo - r, T(0));
        else
          term = std::max(r, hi) - std::min(r, lo);
        total += term;
        slope[static_cast<size_t>(b * pairs + idx)] = (r > hi ? T(1) : T(0)) - (r < lo ? T(1) : T(0));
      }
  }
  const int ig = grids.id();
  return grids.tape().record(
      Tensor<T>::scalar(total * norm), {grids},
      [ig, batch, n, pairs, q, slope, norm](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
        const T* pv = t.value(ig).ptr();
        T* gp = t.grad_buffer(ig).ptr();
        const T scale = g[0] * norm;
        for (int64_t b = 0; b < batch; ++b) {
          const T* pb = pv + b * n * 2;
          T* gb = gp + b * n * 2;
          int idx = 0;
          for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j, ++idx) {
              const T s = slope[static_cast<size_t>(b * pairs + idx)];
              if (s == T(0)) continue;
              const T dx = pb[2 * i] - pb[2 * j], dy = pb[2 * i + 1] - pb[2 * j + 1];
              const T dp = std::hypot(dx, dy);
              if (dp == T(0)) continue;
              const T dq = std::hypot(q[static_cast<size_t>(2 * i)] - q[static_cast<size_t>(2 * j)],
                                      q[static_cast<size_t>(2 * i + 1)] - q[static_cast<size_t>(2 * j + 1)]);
              const T c = scale * s / (dp * dq);
              gb[2 * i] += c * dx;
              gb[2 * i + 1] += c * dy;
              gb[2 * j] -= c * dx;
              gb[2 * j + 1] -= c * dy;
            }
        }
      });
}

template <class T>
Var<T> translation_penalty(Var<T> grids, double b_trans, PenaltyForm form) {
  require_batched_grid(grids.shape(), "translation_penalty");
  const int64_t batch = grids.dim(0);
  const int K = static_cast<int>(grids.dim(1));
  const int n = K * K;
  const Tensor<T> q = reference_grid<T>(K);
  const T bound = static_cast<T>(b_trans);

  // Per (batch, axis) derivative of the penalty w.r.t. each point's coordinate.
  std::vector<T> coeff(static_cast<size_t>(batch * 2));
  const T* p = grids.value().ptr();
  T total = 0;
  for (int64_t b = 0; b < batch; ++b) {
    for (int axis = 0; axis < 2; ++axis) {
      T s = 0, sq = 0;
      for (int k = 0; k < n; ++k) {
        s += p[b * n * 2 + 2 * k + axis];
        sq += q[static_cast<size_t>(2 * k + axis)];
      }
      T term, c;
      if (form == PenaltyForm::Hinge) {
        const T m = (s - sq) / static_cast<T>(n);
        term = std::max(std::abs(m) - bound, T(0));
        c = std::abs(m) > bound ? sgn(m) / static_cast<T>(n) : T(0);
      } else {
        term = std::abs(s - bound);
        c = sgn(s - bound);
      }
      total += term;
      coeff[static_cast<size_t>(b * 2 + axis)] = c;
    }
  }
  const T norm = T(1) / static_cast<T>(batch);
  const int ig = grids.id();
  return grids.tape().record(Tensor<T>::scalar(total * norm), {grids},
                             [ig, batch, n, coeff, norm](Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
                               T* gp = t.grad_buffer(ig).ptr();
                               for (int64_t b = 0; b < batch; ++b)
                                 for (int axis = 0; axis < 2; ++axis) {
                                   const T c = g[0] * norm * coeff[static_cast<size_t>(b * 2 + axis)];
                                   if (c == T(0)) continue;
                                   for (int k = 0; k < n; ++k) gp[b * n * 2 + 2 * k + axis] += c;
                                 }
                             });
}

template <class T>
Var<T> constraint_penalty(Var<T> grids, const ConstraintConfig& cfg) {
  Var<T> total = ops::add(scale_penalty(grids, cfg.a, cfg.translation_penalty),
                          translation_penalty(grids, cfg.b_trans, cfg.translation_penalty));
  return ops::scale(total, static_cast<T>(cfg.weight));
}

template <class T>
T constraint_penalty(const DeformationGrid<T>& grid, const ConstraintConfig& cfg) {
  Tape<T> tape;
  Var<T> g = tape.constant(grid.points.reshaped(Shape{1, grid.K, grid.K, 2}));
  return constraint_penalty(g, cfg).value().item();
}

#define MSPC_INSTANTIATE_CONSTRAINTS(T)                                                 \
  template std::vector<T> pairwise_scale_ratios(const DeformationGrid<T>&);             \
  template FeasibilityReport feasibility_report(const DeformationGrid<T>&, const ConstraintConfig&); \
  template Var<T> scale_penalty(Var<T>, double, PenaltyForm);                           \
  template Var<T> translation_penalty(Var<T>, double, PenaltyForm);                     \
  template Var<T> constraint_penalty(Var<T>, const ConstraintConfig&);                  \
  template T constraint_penalty(const DeformationGrid<T>&, const ConstraintConfig&);

MSPC_INSTANTIATE_CONSTRAINTS(float)
MSPC_INSTANTIATE_CONSTRAINTS(double)

}  // namespace mspc
