#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace ltvlq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Matrix &m) {
  if (m.size() == 0)
    return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Matrix &m) {
  if (m.size() == 0)
    return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

inline bool all_finite(const Matrix &m) { return m.allFinite(); }

inline Matrix blkdiag(const Matrix &a, const Matrix &b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// ||a - b||_F / max(1, ||b||_F)
inline double rel_diff(const Matrix &a, const Matrix &b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Relative asymmetry ||M - M'||_F / max(1, ||M||_F).
inline double asymmetry(const Matrix &m) {
  return (m - m.transpose()).norm() / std::max(1.0, m.norm());
}

/// Numerical rank from singular values: sigma_i > tol * sigma_max.
inline Eigen::Index numerical_rank(const Matrix &m, double tol) {
  if (m.size() == 0)
    return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto &s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0)
    return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0))
      ++r;
  return r;
}

inline void require_shape(const Matrix &m, Eigen::Index rows, Eigen::Index cols,
                          const std::string &what) {
  if (m.rows() != rows || m.cols() != cols)
    throw InputError(what + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

// Partition of an (n+m)x(n+m) matrix into [G11 G12; G12' G22].
inline Matrix block11(const Matrix &g, Eigen::Index n) { return g.topLeftCorner(n, n); }
inline Matrix block12(const Matrix &g, Eigen::Index n) {
  return g.topRightCorner(n, g.cols() - n);
}
inline Matrix block22(const Matrix &g, Eigen::Index n) {
  return g.bottomRightCorner(g.rows() - n, g.cols() - n);
}

/// G11 - G12 G22^{-1} G12'. The caller guarantees G22 is PD.
inline Matrix schur_complement(const Matrix &g, Eigen::Index n) {
  const Matrix g12 = block12(g, n);
  Eigen::LDLT<Matrix> ldlt(block22(g, n));
  return symmetrize(block11(g, n) - g12 * ldlt.solve(g12.transpose()));
}

} // namespace linalg
} // namespace ltvlq
