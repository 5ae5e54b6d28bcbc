#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mspc/networks.hpp"

namespace mspc {

struct TaskDataset;

/// Exact W1 between two 1-D empirical distributions with uniform weights;
/// the sizes may differ.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Mean over `n_projections` random unit directions (Gaussian, normalized,
/// drawn from mt19937_64(seed)) of W1 between the projected sets. Each set
/// is [N, ...], flattened per leading index.
template <class T>
double sliced_wasserstein(const Tensor<T>& set_a, const Tensor<T>& set_b, int n_projections, uint64_t seed);

/// Same with caller-supplied directions (used as they are, not normalized).
template <class T>
double sliced_wasserstein(const Tensor<T>& set_a, const Tensor<T>& set_b,
                          const std::vector<std::vector<double>>& directions);

/// G applied to every image of [N,C,S,S], in chunks.
template <class T>
Tensor<T> translate_all(const Module<T>& g, const Tensor<T>& images, int chunk = 16);

/// Each image of `images` warped by the grid the T-net predicts for it.
template <class T>
Tensor<T> perturb_all(const Module<T>& t_net, const Tensor<T>& images, int chunk = 16);

/// Batch mean of |T(G(x)) - G(T(x))|_1 with the grid predicted from x.
template <class T>
double commutativity_residual(const Module<T>& g, const Module<T>& t_net, const Tensor<T>& batch_x);

template <class T>
double commutativity_residual(const ModelSet<T>& models, const Tensor<T>& batch_x) {
  return commutativity_residual(*models.translator, *models.t_net, batch_x);
}

struct EvalConfig {
  int projections = 128;
  uint64_t seed = 0;
  double tau = 0.1;
};

/// Sliced-Wasserstein divergences of (X,Y), (T(X),T(Y)), (G(X),Y), (G(T(X)),T(Y)).
struct AlignmentTable {
  double x_y = 0;
  double tx_ty = 0;
  double gx_y = 0;
  double gtx_ty = 0;
};

AlignmentTable alignment_table(const Module<float>& g, const Module<float>& t_net, const Tensor<float>& X,
                               const Tensor<float>& Y, const EvalConfig& cfg = {});
inline AlignmentTable alignment_table(const ModelSet<float>& m, const Tensor<float>& X, const Tensor<float>& Y,
                                      const EvalConfig& cfg = {}) {
  return alignment_table(*m.translator, *m.t_net, X, Y, cfg);
}

struct GroundTruthError {
  double l1 = 0;        ///< mean |G(x) - gt(x)| over all pixels and images
  double accuracy = 0;  ///< fraction of values within tau of the truth
};

/// Throws ContractViolation when the dataset has no ground truth.
GroundTruthError ground_truth_error(const Module<float>& g, const TaskDataset& data, double tau = 0.1);

}  // namespace mspc
