#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "goldie/types.hpp"

namespace goldie {

/// Orthonormal basis of the nullspace of A (columns of the result).
/// Singular values below rank_tol * sigma_max are treated as zero;
/// the zero matrix has full nullspace.
inline Matrix nullspace(const Matrix& a, double rank_tol = tol::rank) {
  if (a.rows() == 0 || a.isZero(0.0))
    return Matrix::Identity(a.cols(), a.cols());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = rank_tol * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

/// Orthonormal basis of the column space of A (columns of the result).
inline Matrix colspace(const Matrix& a, double rank_tol = tol::rank) {
  if (a.cols() == 0 || a.isZero(0.0)) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cut = rank_tol * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  return svd.matrixU().leftCols(rank);
}

/// Minimum-norm least-squares solution of A x = b via SVD.
inline Vector min_norm_solve(const Matrix& a, const Vector& b,
                             double rank_tol = tol::rank) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(rank_tol);
  return svd.solve(b);
}

/// Distance of x from the column span of an orthonormal basis Q,
/// relative to |x|.
inline double span_distance(const Matrix& q, const Vector& x) {
  const double nx = x.norm();
  if (nx == 0.0) return 0.0;
  if (q.cols() == 0) return 1.0;
  return (x - q * (q.transpose() * x)).norm() / nx;
}

}  // namespace goldie
