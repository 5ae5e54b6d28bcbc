#pragma once

#include <Eigen/Core>

namespace mspc::detail {

/// C[M,N] (+)= op(A)[M,K] * op(B)[K,N], all row-major.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> ma(a, trans_a ? k : m, trans_a ? m : k);
  Eigen::Map<const Mat> mb(b, trans_b ? n : k, trans_b ? k : n);
  Eigen::Map<Mat> mc(c, m, n);
  if (!accumulate) mc.setZero();
  if (!trans_a && !trans_b)
    mc.noalias() += ma * mb;
  else if (trans_a && !trans_b)
    mc.noalias() += ma.transpose() * mb;
  else if (!trans_a && trans_b)
    mc.noalias() += ma * mb.transpose();
  else
    mc.noalias() += ma.transpose() * mb.transpose();
}

}  // namespace mspc::detail
