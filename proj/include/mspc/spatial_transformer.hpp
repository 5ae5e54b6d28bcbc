#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "mspc/module.hpp"
#include "mspc/tensor.hpp"

// Differentiable spatial perturbation: a coarse K x K control grid is
// densified to a per-pixel sampling field, and images are resampled through
// that field with the bilinear tent kernel k(t) = max(0, 1 - |t|).
//
// Coordinates are normalized to [-1, 1] with the origin at the image centre,
// stored x first then y. -1 and +1 address the centres of the first and last
// pixel. Source taps outside the image read as zero.
namespace mspc {

/// Normalized coordinate of pixel `index` along an axis of `extent` pixels.
template <class T>
T lattice_coord(int64_t index, int64_t extent) {
  if (extent <= 1) return T(0);
  return T(-1) + T(2) * static_cast<T>(index) / static_cast<T>(extent - 1);
}

/// The fixed uniform K x K reference lattice q, shape [K,K,2].
template <class T>
Tensor<T> reference_grid(int K);

template <class T>
struct DeformationGrid {
  int K = 2;
  Tensor<T> points;  ///< p, shape [K,K,2], row-major over (y, x), entries (x, y)

  static DeformationGrid identity(int K) { return DeformationGrid{K, reference_grid<T>(K)}; }
  Tensor<T> reference() const { return reference_grid<T>(K); }

  /// Control point (row i, column j) as {x, y}.
  std::array<T, 2> at(int i, int j) const {
    const size_t o = static_cast<size_t>((i * K + j) * 2);
    return {points[o], points[o + 1]};
  }
};

/// Per-output-pixel source coordinates, shape [H,W,2].
template <class T>
struct SamplingField {
  Tensor<T> coords;
  int64_t height() const { return coords.dim(0); }
  int64_t width() const { return coords.dim(1); }
};

// ---- value-level API -------------------------------------------------------

template <class T>
SamplingField<T> densify(const DeformationGrid<T>& grid, int height, int width);

/// image [C,H,W] -> [C,H,W]
template <class T>
Tensor<T> warp(const Tensor<T>& image, const SamplingField<T>& field);

/// Stacks per-image grids into [B,K,K,2] / splits them back.
template <class T>
Tensor<T> stack_grids(const std::vector<DeformationGrid<T>>& grids);
template <class T>
std::vector<DeformationGrid<T>> unstack_grids(const Tensor<T>& grids);

// ---- tape ops --------------------------------------------------------------

/// grids [B,K,K,2] -> fields [B,H,W,2]. Separable bilinear interpolation of
/// the control-point displacements over the pixel lattice.
template <class T>
Var<T> densify(Var<T> grids, int height, int width);

/// images [B,C,H,W], fields [B,H,W,2] -> [B,C,H,W]; differentiable in both.
template <class T>
Var<T> warp(Var<T> images, Var<T> fields);

/// grids [B,K,K,2] predicted by the T-net for images [B,C,H,W].
template <class T>
Var<T> predict_grid(const Module<T>& t_net, Var<T> images, ParamMode mode);

/// Warps `target` with the grid predicted from `source`; the same grid is
/// applied to whatever image is passed, which is what makes T(G(x)) and
/// G(T(x)) comparable.
template <class T>
Var<T> apply_T(const Module<T>& t_net, Var<T> source, Var<T> target, ParamMode mode);

// ---- plain-text grid files -------------------------------------------------
//
//   <K>
//   <x> <y>      K*K lines, row-major (top row first, left to right)
//
// Blank lines and lines starting with '#' are ignored.

void write_grid_text(std::ostream& os, const DeformationGrid<double>& grid);
/// Throws ConfigError naming the offending line.
DeformationGrid<double> read_grid_text(std::istream& is);
DeformationGrid<double> load_grid_file(const std::string& path);
void save_grid_file(const std::string& path, const DeformationGrid<double>& grid);

}  // namespace mspc
