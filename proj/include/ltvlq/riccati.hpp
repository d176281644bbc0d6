#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace ltvlq {

/// Condition number above which R(k) + gamma B'P(k+1)B is treated as singular.
inline constexpr double kMaxRiccatiCondition = 1e14;

/// P(0..N) from the backward difference Riccati recursion, P(N) = Qf.
struct ValueMatrices {
  std::vector<Matrix> P;
};

/// Q-function matrices Ghat(k) and the initial value matrix What = P(0).
struct QFunctionCertificate {
  std::vector<Matrix> G_hat;
  Matrix W_hat;
};

namespace detail {

// R(k) + gamma B'(k) P(k+1) B(k), factored; throws when ill-conditioned.
inline Eigen::LDLT<Matrix> factor_input_hessian(const TimeVaryingSystem &sys,
                                                const CostSpec &cost,
                                                const Matrix &P_next,
                                                std::size_t k) {
  const Matrix &B = sys.B[k];
  const Matrix H =
      linalg::symmetrize(cost.R[k] + cost.gamma * B.transpose() * P_next * B);
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (!(lo > 0.0) || hi / lo > kMaxRiccatiCondition)
    throw ConditioningError(k, "R + gamma B'PB is numerically singular at step " +
                                   std::to_string(k));
  return Eigen::LDLT<Matrix>(H);
}

} // namespace detail

inline ValueMatrices solve_dre(const TimeVaryingSystem &sys, const CostSpec &cost) {
  sys.validate();
  cost.validate_against(sys);
  const std::size_t N = sys.horizon();
  const double g = cost.gamma;
  ValueMatrices vm;
  vm.P.resize(N + 1);
  vm.P[N] = cost.Qf;
  for (std::size_t k = N; k-- > 0;) {
    const Matrix &A = sys.A[k];
    const Matrix &B = sys.B[k];
    const Matrix &Pn = vm.P[k + 1];
    auto ldlt = detail::factor_input_hessian(sys, cost, Pn, k);
    const Matrix BtPA = B.transpose() * Pn * A;
    vm.P[k] = linalg::symmetrize(cost.Q[k] + g * A.transpose() * Pn * A -
                                 g * g * BtPA.transpose() * ldlt.solve(BtPA));
  }
  return vm;
}

/// K(k) = -(R + gamma B'P(k+1)B)^{-1} gamma B'P(k+1)A.
inline GainSchedule optimal_gains(const TimeVaryingSystem &sys, const CostSpec &cost,
                                  const ValueMatrices &vm) {
  const std::size_t N = sys.horizon();
  if (vm.P.size() != N + 1)
    throw InputError("value matrices do not match the system horizon");
  GainSchedule gs;
  gs.K.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    auto ldlt = detail::factor_input_hessian(sys, cost, vm.P[k + 1], k);
    const Matrix BtPA = sys.B[k].transpose() * vm.P[k + 1] * sys.A[k];
    gs.K.push_back(-cost.gamma * ldlt.solve(BtPA));
  }
  return gs;
}

inline QFunctionCertificate qfunction_matrices(const TimeVaryingSystem &sys,
                                               const CostSpec &cost,
                                               const ValueMatrices &vm) {
  const std::size_t N = sys.horizon();
  if (vm.P.size() != N + 1)
    throw InputError("value matrices do not match the system horizon");
  const auto n = sys.n(), m = sys.m();
  const double g = cost.gamma;
  QFunctionCertificate qc;
  qc.G_hat.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Matrix &A = sys.A[k];
    const Matrix &B = sys.B[k];
    const Matrix &Pn = vm.P[k + 1];
    Matrix G(n + m, n + m);
    G.topLeftCorner(n, n) = cost.Q[k] + g * A.transpose() * Pn * A;
    G.topRightCorner(n, m) = g * A.transpose() * Pn * B;
    G.bottomLeftCorner(m, n) = G.topRightCorner(n, m).transpose();
    G.bottomRightCorner(m, m) = cost.R[k] + g * B.transpose() * Pn * B;
    qc.G_hat.push_back(linalg::symmetrize(G));
  }
  qc.W_hat = vm.P[0];
  return qc;
}

} // namespace ltvlq
