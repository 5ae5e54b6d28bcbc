#pragma once

#include <array>
#include <string>
#include <vector>

#include "mspc/spatial_transformer.hpp"

namespace mspc {

enum class PenaltyForm {
  /// relu(r - a) + relu(1/a - r) per pair; relu(|mean(p - q)| - b) per axis.
  /// Zero exactly on the feasible set.
  Hinge,
  /// max(r, a) - min(r, 1/a) per pair; |sum(p) - b| per axis.
  /// Same scale-term gradient as Hinge, offset by the constant a - 1/a.
  LiteralR4,
};

PenaltyForm parse_penalty_form(const std::string& name);
std::string to_string(PenaltyForm form);

/// Feasible set for a control grid: every pairwise distance ratio
/// |p_i p_j| / |q_i q_j| lies in [1/a, a], and the mean control-point
/// displacement along each axis lies in [-b_trans, b_trans].
struct ConstraintConfig {
  double a = 3.0;
  double b_trans = 0.25;
  double weight = 1.0;
  PenaltyForm translation_penalty = PenaltyForm::Hinge;

  /// Throws ConfigError unless a > 1, b_trans in [0, 1], weight >= 0.
  void validate() const;
};

/// |p_i p_j| / |q_i q_j| for every unordered pair i < j of control points,
/// points enumerated row-major.
template <class T>
std::vector<T> pairwise_scale_ratios(const DeformationGrid<T>& grid);

struct FeasibilityReport {
  std::vector<bool> scale_ok;             ///< per pair, same order as pairwise_scale_ratios
  std::vector<double> scale_violation;    ///< distance of the ratio outside [1/a, a]
  std::array<bool, 2> translation_ok{};   ///< x, y
  std::array<double, 2> translation_violation{};

  bool feasible() const;
  size_t violated_count() const;
};

template <class T>
FeasibilityReport feasibility_report(const DeformationGrid<T>& grid, const ConstraintConfig& cfg);

// ---- differentiable penalties on batched grids [B,K,K,2] -------------------
// Each returns the batch mean. `form` selects the hinge or literal variant.

template <class T>
Var<T> scale_penalty(Var<T> grids, double a, PenaltyForm form);

template <class T>
Var<T> translation_penalty(Var<T> grids, double b_trans, PenaltyForm form);

/// weight * (scale_penalty + translation_penalty), form from cfg.
template <class T>
Var<T> constraint_penalty(Var<T> grids, const ConstraintConfig& cfg);

/// Value-level penalty of a single grid.
template <class T>
T constraint_penalty(const DeformationGrid<T>& grid, const ConstraintConfig& cfg);

}  // namespace mspc
