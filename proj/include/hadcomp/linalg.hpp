#pragma once

#include <Eigen/Dense>

#include <complex>
#include <limits>

namespace hadcomp {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Determinant by LU with full pivoting (channel counts stay small).
inline std::complex<double> determinant(const CMatrix& m) {
  if (m.rows() == 0) return 1.0;
  return Eigen::FullPivLU<CMatrix>(m).determinant();
}

/// Adjugate from cofactors; n is at most a handful of channels.
inline CMatrix adjugate(const CMatrix& m) {
  const Eigen::Index n = m.rows();
  CMatrix adj(n, n);
  if (n == 1) {
    adj(0, 0) = 1.0;
    return adj;
  }
  CMatrix minor(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
        if (r == i) continue;
        for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = m(r, c);
        }
        ++rr;
      }
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * determinant(minor);
    }
  }
  return adj;
}

/// 2-norm condition number; infinite for an exactly singular matrix.
inline double condition_number(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

}  // namespace hadcomp
