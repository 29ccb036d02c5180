#pragma once

// Orthonormal 2-D DCT-II and its inverse (DCT-III), computed as C_h * X * C_w^T.

#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "salrun/image.hpp"

namespace salrun {

/// Orthonormal DCT-II basis: row k holds a_k cos(pi (2n + 1) k / 2N).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dct_matrix(Eigen::Index n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> c(n, n);
  const Scalar a0 = std::sqrt(Scalar(1) / Scalar(n));
  const Scalar ak = std::sqrt(Scalar(2) / Scalar(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      c(k, i) = (k == 0 ? a0 : ak) *
                std::cos(std::numbers::pi_v<Scalar> * Scalar(2 * i + 1) * Scalar(k) / Scalar(2 * n));
    }
  }
  return c;
}

template <typename Derived>
Plane<typename Derived::Scalar> dct2(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto ch = dct_matrix<Scalar>(x.rows());
  const auto cw = dct_matrix<Scalar>(x.cols());
  return (ch * x.derived().matrix() * cw.transpose()).array();
}

template <typename Derived>
Plane<typename Derived::Scalar> idct2(const Eigen::DenseBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  const auto ch = dct_matrix<Scalar>(y.rows());
  const auto cw = dct_matrix<Scalar>(y.cols());
  return (ch.transpose() * y.derived().matrix() * cw).array();
}

}  // namespace salrun
