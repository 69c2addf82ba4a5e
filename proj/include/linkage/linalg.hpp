#pragma once

// SVD-based rank, range and null-space helpers shared by every module.

#include <Eigen/Dense>
#include <algorithm>

namespace linkage {

inline constexpr double kDefaultTolRank = 1e-8;
inline constexpr double kRankFloor = 1e-12;

/// Threshold below which a singular value counts as zero.
inline double rank_threshold(const Eigen::VectorXd& singular_values, double tol_rank) {
  const double smax = singular_values.size() ? singular_values.maxCoeff() : 0.0;
  return std::max(tol_rank * smax, kRankFloor);
}

inline int numerical_rank(const Eigen::MatrixXd& m, double tol_rank = kDefaultTolRank) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  const double thr = rank_threshold(s, tol_rank);
  return static_cast<int>((s.array() > thr).count());
}

/// Orthonormal basis (as columns) of the column space of m.
inline Eigen::MatrixXd range_basis(const Eigen::MatrixXd& m, double tol_rank = kDefaultTolRank) {
  if (m.size() == 0) return Eigen::MatrixXd(m.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double thr = rank_threshold(s, tol_rank);
  const int r = static_cast<int>((s.array() > thr).count());
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis (as columns) of the null space of m; m has `cols` columns.
inline Eigen::MatrixXd null_basis(const Eigen::MatrixXd& m, Eigen::Index cols,
                                  double tol_rank = kDefaultTolRank) {
  if (m.rows() == 0) return Eigen::MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double thr = rank_threshold(s, tol_rank);
  const int r = static_cast<int>((s.array() > thr).count());
  return svd.matrixV().rightCols(cols - r);
}

/// Minimum-norm least-squares solution of m x = b with the same rank cut as above.
inline Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& b,
                                  double tol_rank = kDefaultTolRank) {
  if (m.size() == 0) return Eigen::VectorXd::Zero(m.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double thr = rank_threshold(s, tol_rank);
  Eigen::VectorXd ub = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < s.size(); ++i) ub(i) = s(i) > thr ? ub(i) / s(i) : 0.0;
  return svd.matrixV() * ub;
}

}  // namespace linkage
