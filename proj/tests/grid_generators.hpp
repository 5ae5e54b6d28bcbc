#pragma once

// Random control grids that are feasible or infeasible by construction.

#include <cmath>
#include <random>

#include "mspc/constraints.hpp"

namespace mspc::testing {

// Similarity transform of the reference lattice plus a jitter of at most
// `jitter` per point. Adjacent points sit 2 apart, so the jitter moves any
// ratio by at most `jitter`.
inline DeformationGrid<double> similarity_grid(int K, double scale, double angle, double tx, double ty,
                                               double jitter, std::mt19937_64& rng) {
  auto g = DeformationGrid<double>::identity(K);
  std::uniform_real_distribution<double> dir(0, 2 * M_PI), mag(0, 1);
  const double c = std::cos(angle), s = std::sin(angle);
  for (size_t i = 0; i < g.points.size(); i += 2) {
    const double x = g.points[i], y = g.points[i + 1];
    const double t = dir(rng), r = jitter * mag(rng);
    g.points[i] = scale * (c * x - s * y) + tx + r * std::cos(t);
    g.points[i + 1] = scale * (s * x + c * y) + ty + r * std::sin(t);
  }
  return g;
}

inline DeformationGrid<double> random_feasible_grid(const ConstraintConfig& cfg, std::mt19937_64& rng, int K = 2) {
  const double margin = 0.05, jitter = 0.04;
  std::uniform_real_distribution<double> sc(1.0 / cfg.a + margin, cfg.a - margin), ang(-M_PI, M_PI),
      tr(-(cfg.b_trans - margin), cfg.b_trans - margin);
  // The jitter also moves the mean displacement by less than the margin.
  const double scale = sc(rng), angle = ang(rng), tx = tr(rng), ty = tr(rng);
  return similarity_grid(K, scale, angle, tx, ty, jitter, rng);
}

inline DeformationGrid<double> random_infeasible_grid(const ConstraintConfig& cfg, std::mt19937_64& rng, int K = 2) {
  std::uniform_int_distribution<int> mode(0, 2);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI), u(0.1, 1.0);
  switch (mode(rng)) {
    case 0:  // dilation beyond a
      return similarity_grid(K, cfg.a + u(rng), ang(rng), 0, 0, 0.04, rng);
    case 1:  // contraction below 1/a
      return similarity_grid(K, 1.0 / cfg.a * (0.9 - 0.5 * u(rng)), ang(rng), 0, 0, 0.01, rng);
    default: {  // feasible shape, translated past b_trans
      const double t = (cfg.b_trans + 0.05 + 0.5 * u(rng)) * (u(rng) < 0.55 ? -1 : 1);
      return u(rng) < 0.5 ? similarity_grid(K, 1.0, ang(rng), t, 0, 0.04, rng)
                          : similarity_grid(K, 1.0, ang(rng), 0, t, 0.04, rng);
    }
  }
}

}  // namespace mspc::testing
