#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ensemble.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "lmi_assembler.hpp"
#include "model.hpp"
#include "riccati.hpp"

namespace ltvlq {

inline constexpr double kKktTolerance = 1e-6;

/// Candidate multipliers for the nonlinear dual program. M1(k) pairs with
/// G22(k) and is zero; M2 = Z; M3(k) = [I; K(k)] Gamma(k) [I; K(k)]' with
/// Gamma(0) = Z and Gamma(k) = E(k-1) M3(k-1) E(k-1)'.
struct KktCertificate {
  std::vector<Matrix> M1;
  Matrix M2;
  std::vector<Matrix> M3;
  std::vector<Matrix> Gamma;
};

inline KktCertificate build_kkt_certificate(const TimeVaryingSystem &sys, const CostSpec &cost,
                                            const Matrix &Z) {
  const auto n = sys.n(), m = sys.m();
  linalg::require_shape(Z, n, n, "Z");
  const ValueMatrices vm = solve_dre(sys, cost);
  const GainSchedule gains = optimal_gains(sys, cost, vm);
  const std::size_t N = sys.horizon();
  KktCertificate cert;
  cert.M1.assign(N, Matrix::Zero(m, m));
  cert.M2 = linalg::symmetrize(Z);
  Matrix gamma = cert.M2;
  for (std::size_t k = 0; k < N; ++k) {
    Matrix T(n + m, n);
    T << Matrix::Identity(n, n), gains.K[k];
    cert.Gamma.push_back(gamma);
    cert.M3.push_back(linalg::symmetrize(T * gamma * T.transpose()));
    const Matrix E = stage_matrices(sys, cost, k).E;
    gamma = linalg::symmetrize(E * cert.M3.back() * E.transpose());
  }
  return cert;
}

/// One row of a KKT report. `residual` is a nonnegative magnitude; `index`
/// is the step attaining it (or -1 for scalar conditions).
struct KktItem {
  std::string label;
  std::string description;
  double residual = 0.0;
  long index = -1;
  bool skipped = false;
};

struct KktReport {
  std::vector<KktItem> items;
  double max_residual = 0.0;
  double scale = 1.0;
  double tolerance = kKktTolerance;
  bool pass = false;
  std::string sign_convention =
      "L = -trace(ZW) - sum trace(M * constraint); dual feasibility as "
      "max(0, -min eig); slackness as |trace(M * slack)|; stationarity as "
      "Frobenius norms of the printed gradients";

  const KktItem *find(const std::string &label) const {
    for (const auto &it : items)
      if (it.label == label)
        return &it;
    return nullptr;
  }

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto &it : items)
      if (!it.skipped && it.residual > tolerance * scale)
        out.push_back(it.label);
    return out;
  }

  void finalize() {
    max_residual = 0.0;
    for (const auto &it : items)
      if (!it.skipped)
        max_residual = std::max(max_residual, it.residual);
    pass = std::isfinite(max_residual) && max_residual <= tolerance * scale;
  }
};

namespace detail {

inline Matrix pinv_sym(const Matrix &a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(a));
  const Vector &ev = es.eigenvalues();
  const double cut = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) > cut)
      inv(i) = 1.0 / ev(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline double neg_part(double lmin) { return std::max(0.0, -lmin); }

struct Worst {
  double value = 0.0;
  long index = -1;
  void take(double v, long k) {
    if (!(v <= value)) { // NaN propagates
      value = v;
      index = k;
    }
  }
};

inline void check_solution_shapes(const DualSolution &sol, Eigen::Index n, Eigen::Index m,
                                  std::size_t N) {
  linalg::require_shape(sol.W, n, n, "W");
  if (sol.G.size() != N)
    throw InputError("solution has " + std::to_string(sol.G.size()) +
                     " G blocks, expected " + std::to_string(N));
  for (std::size_t k = 0; k < N; ++k)
    linalg::require_shape(sol.G[k], n + m, n + m, "G(" + std::to_string(k) + ")");
}

// Value matrix G11 - G12 G22^+ G12' of a Q-function block.
inline Matrix value_of(const Matrix &G, Eigen::Index n) {
  const Matrix g12 = linalg::block12(G, n);
  return linalg::symmetrize(linalg::block11(G, n) -
                            g12 * pinv_sym(linalg::block22(G, n)) * g12.transpose());
}

} // namespace detail

/// Evaluates dual feasibility, complementary slackness and stationarity of
/// the nonlinear dual program at `sol` with the multipliers of `cert`.
/// G22^{-1} is taken as a pseudo-inverse; a separate item reports whether
/// every G22(k) is positive definite.
inline KktReport check_kkt(const TimeVaryingSystem &sys, const CostSpec &cost, const Matrix &Z,
                           const DualSolution &sol, const KktCertificate &cert,
                           double tolerance = kKktTolerance) {
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  detail::check_solution_shapes(sol, n, m, N);
  if (cert.M1.size() != N || cert.M3.size() != N)
    throw InputError("certificate length does not match horizon");
  linalg::require_shape(Z, n, n, "Z");

  Matrix T1 = Matrix::Zero(n + m, n), T2 = Matrix::Zero(n + m, m);
  T1.topRows(n).setIdentity();
  T2.bottomRows(m).setIdentity();

  std::vector<Matrix> E(N), Lambda(N), G22inv(N);
  double scale = std::max({sol.W.norm(), Z.norm(), cert.M2.norm(), cost.Qf.norm()});
  detail::Worst g22pd;
  for (std::size_t k = 0; k < N; ++k) {
    const StageMatrices st = stage_matrices(sys, cost, k);
    E[k] = st.E;
    Lambda[k] = st.Lambda;
    const Matrix g22 = sol.G22(k);
    G22inv[k] = detail::pinv_sym(g22);
    const double lmin = linalg::min_eigenvalue(g22);
    g22pd.take(lmin > 0.0 ? 0.0 : std::max(-lmin, std::numeric_limits<double>::min()),
               static_cast<long>(k));
    scale = std::max({scale, sol.G[k].norm(), cert.M3[k].norm(), Lambda[k].norm()});
  }

  KktReport rep;
  rep.tolerance = tolerance;
  rep.scale = 1.0 + scale;
  auto push = [&](const char *label, const char *what, const detail::Worst &w) {
    rep.items.push_back({label, what, w.value, w.index, false});
  };

  detail::Worst w39, w40, w41, w42, w43, w44, w45;
  for (std::size_t k = 0; k < N; ++k) {
    w39.take(detail::neg_part(linalg::min_eigenvalue(cert.M1[k])), static_cast<long>(k));
    w41.take(detail::neg_part(linalg::min_eigenvalue(cert.M3[k])), static_cast<long>(k));
    w42.take(std::abs((cert.M1[k] * sol.G22(k)).trace()), static_cast<long>(k));
  }
  w40.take(detail::neg_part(linalg::min_eigenvalue(cert.M2)), -1);

  const Matrix G12_0 = sol.G12(0);
  const Matrix slack0 =
      sol.G11(0) - sol.W - G12_0 * G22inv[0] * G12_0.transpose();
  w43.take(std::abs((cert.M2 * slack0).trace()), -1);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const Matrix V = detail::value_of(sol.G[k + 1], n);
    const Matrix slack = E[k].transpose() * V * E[k] - sol.G[k] + Lambda[k];
    w44.take(std::abs((cert.M3[k] * slack).trace()), static_cast<long>(k));
  }
  {
    const std::size_t k = N - 1;
    const Matrix slack = E[k].transpose() * cost.Qf * E[k] - sol.G[k] + Lambda[k];
    w45.take(std::abs((cert.M3[k] * slack).trace()), static_cast<long>(k));
  }

  push("eq39", "M1(k) >= 0", w39);
  push("eq40", "M2 >= 0", w40);
  push("eq41", "M3(k) >= 0", w41);
  push("eq42", "trace(M1(k) G22(k)) = 0", w42);
  push("eq43", "trace(M2 (G11(0) - W - G12 G22^-1 G12')) = 0", w43);
  push("eq44", "trace(M3(k) (E' V(k+1) E - G(k) + Lambda(k))) = 0", w44);
  push("eq45", "trace(M3(N-1) (E' Qf E - G(N-1) + Lambda(N-1))) = 0", w45);

  // Stationarity, with Xi = M2 at k = 0 and Xi = E(k-1) M3(k-1) E(k-1)' after.
  detail::Worst w49, w50, w51, w52, w53, w54, w55;
  w49.take((-Z + cert.M2).norm(), -1);
  for (std::size_t k = 0; k < N; ++k) {
    const Matrix Xi =
        k == 0 ? cert.M2 : Matrix(E[k - 1] * cert.M3[k - 1] * E[k - 1].transpose());
    const Matrix F = sol.G12(k) * G22inv[k]; // G12 G22^{-1}
    const Matrix &M3 = cert.M3[k];
    const double r11 = (-Xi + T1.transpose() * M3 * T1).norm();
    const double r12 = (Xi * F + T1.transpose() * M3 * T2).norm();
    const double r22 = (-F.transpose() * Xi * F + T2.transpose() * M3 * T2).norm();
    const long kk = static_cast<long>(k);
    if (k == 0) {
      w50.take(r11, kk);
      w51.take(r12, kk);
      w52.take(r22, kk);
    } else {
      w53.take(r11, kk);
      w54.take(r12, kk);
      w55.take(r22, kk);
    }
  }
  push("eq49", "grad_W: -Z + M2 = 0", w49);
  push("eq50", "grad_G11(0): -M2 + T1' M3(0) T1 = 0", w50);
  push("eq51", "grad_G12(0): M2 G12 G22^-1 + T1' M3(0) T2 = 0", w51);
  push("eq52", "grad_G22(0): -G22^-1 G12' M2 G12 G22^-1 + T2' M3(0) T2 = 0", w52);
  push("eq53", "grad_G11(k): -E M3(k-1) E' + T1' M3(k) T1 = 0", w53);
  push("eq54", "grad_G12(k): E M3(k-1) E' G12 G22^-1 + T1' M3(k) T2 = 0", w54);
  push("eq55", "grad_G22(k): -G22^-1 G12' E M3(k-1) E' G12 G22^-1 + T2' M3(k) T2 = 0", w55);
  if (N == 1)
    for (auto &it : rep.items)
      if (it.label == "eq53" || it.label == "eq54" || it.label == "eq55")
        it.skipped = true;
  push("g22_pd", "G22(k) > 0", g22pd);
  rep.finalize();
  return rep;
}

/// Model-free variant: no plant is available, so only the data LMIs of the
/// time-varying program and positivity of G22 are checked. Model-dependent
/// conditions are listed as skipped.
inline KktReport check_kkt_data(const DataEnsemble &ens, const CostSpec &cost,
                                const DualSolution &sol, double tolerance = kKktTolerance) {
  const auto n = ens.n(), m = ens.m();
  const std::size_t N = ens.horizon();
  detail::check_solution_shapes(sol, n, m, N);
  const ConicProgram prog = assemble_model_free_ltv(ens, cost);
  const Vector y = VariableLayout(n, m, N).pack(sol.W, sol.G);

  KktReport rep;
  rep.tolerance = tolerance;
  double scale = sol.W.norm();
  for (const auto &g : sol.G)
    scale = std::max(scale, g.norm());
  rep.scale = 1.0 + scale;
  for (const char *label : {"eq39", "eq40", "eq41", "eq42", "eq43", "eq44", "eq45", "eq49",
                            "eq50", "eq51", "eq52", "eq53", "eq54", "eq55"})
    rep.items.push_back({label, "requires the plant model", 0.0, -1, true});

  detail::Worst blocks, g22pd;
  for (std::size_t b = 0; b < prog.blocks.size(); ++b)
    blocks.take(detail::neg_part(linalg::min_eigenvalue(prog.blocks[b].evaluate(y))),
                static_cast<long>(b));
  for (std::size_t k = 0; k < N; ++k) {
    const double lmin = linalg::min_eigenvalue(sol.G22(k));
    g22pd.take(lmin > 0.0 ? 0.0 : std::max(-lmin, std::numeric_limits<double>::min()),
               static_cast<long>(k));
  }
  rep.items.push_back({"data_lmi", "data LMI blocks >= 0 (index is block number)",
                       blocks.value, blocks.index, false});
  rep.items.push_back({"g22_pd", "G22(k) > 0", g22pd.value, g22pd.index, false});
  rep.finalize();
  return rep;
}

/// S(k) = sum over initial directions of the stacked (state, input) outer
/// products, discounted; see reconstruct_primal.
struct PrimalReconstruction {
  std::vector<Matrix> S;
  double objective = 0.0;
};

/// S(0) = [I; K(0)] Z [I; K(0)]', S(k+1) = A_K(k) S(k) A_K(k)' with
/// A_K(k) = [I; K(k+1)] E(k). The objective is
/// trace(E(N-1)' Qf E(N-1) S(N-1)) + sum_k trace(Lambda(k) S(k)).
inline PrimalReconstruction reconstruct_primal(const TimeVaryingSystem &sys,
                                               const CostSpec &cost, const GainSchedule &gains,
                                               const Matrix &Z) {
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  gains.validate(n, m, N);
  linalg::require_shape(Z, n, n, "Z");
  auto lift = [&](std::size_t k) {
    Matrix T(n + m, n);
    T << Matrix::Identity(n, n), gains.K[k];
    return T;
  };
  PrimalReconstruction pr;
  Matrix T = lift(0);
  pr.S.push_back(linalg::symmetrize(T * Z * T.transpose()));
  for (std::size_t k = 0; k < N; ++k) {
    const StageMatrices st = stage_matrices(sys, cost, k);
    pr.objective += (st.Lambda * pr.S[k]).trace();
    if (k + 1 < N) {
      const Matrix AK = lift(k + 1) * st.E;
      pr.S.push_back(linalg::symmetrize(AK * pr.S[k] * AK.transpose()));
    } else {
      pr.objective += (st.E.transpose() * cost.Qf * st.E * pr.S[k]).trace();
    }
  }
  return pr;
}

/// primal_obj - trace(Z W); nonnegative up to round-off by weak duality.
inline double duality_gap(double primal_obj, const DualSolution &sol, const Matrix &Z) {
  return primal_obj - (Z * sol.W).trace();
}

struct ConstraintCheck {
  std::string label;
  long index = -1;
  double min_eigenvalue = 0.0;
  double residual = 0.0; // Frobenius norm of the slack
};

struct Problem2Report {
  std::vector<ConstraintCheck> constraints;
  double min_eigenvalue = 0.0;
  double scale = 1.0;
  double tolerance = kKktTolerance;
  bool pass = false;
};

/// Evaluates the Schur-complemented constraints of the nonlinear dual
/// program directly: G22 > 0, the initial-value block, the N-1 transition
/// blocks and the terminal block. Throws CertificationError if some G22(k)
/// is singular.
inline Problem2Report check_problem2_feasibility(const DualSolution &sol,
                                                 const TimeVaryingSystem &sys,
                                                 const CostSpec &cost,
                                                 double tolerance = kKktTolerance) {
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  detail::check_solution_shapes(sol, n, m, N);
  Problem2Report rep;
  rep.tolerance = tolerance;
  double scale = sol.W.norm();
  std::vector<Matrix> V(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Matrix g22 = sol.G22(k);
    const double lmin = linalg::min_eigenvalue(g22);
    if (!(lmin > kPdFloor * std::max(1.0, linalg::max_eigenvalue(g22))))
      throw CertificationError("G22(" + std::to_string(k) + ") is singular (min eigenvalue " +
                               std::to_string(lmin) + ")");
    rep.constraints.push_back({"prob2:a", static_cast<long>(k), lmin, 0.0});
    V[k] = linalg::schur_complement(sol.G[k], n);
    scale = std::max(scale, sol.G[k].norm());
  }
  auto add = [&](const std::string &label, long k, const Matrix &slack) {
    rep.constraints.push_back({label, k, linalg::min_eigenvalue(slack), slack.norm()});
  };
  add("prob2:b", -1, V[0] - sol.W);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const StageMatrices st = stage_matrices(sys, cost, k);
    add("prob2:c", static_cast<long>(k),
        linalg::symmetrize(st.E.transpose() * V[k + 1] * st.E - sol.G[k] + st.Lambda));
  }
  {
    const StageMatrices st = stage_matrices(sys, cost, N - 1);
    add("prob2:d", static_cast<long>(N - 1),
        linalg::symmetrize(st.E.transpose() * cost.Qf * st.E - sol.G[N - 1] + st.Lambda));
  }
  rep.scale = 1.0 + scale;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto &c : rep.constraints)
    if (c.label != "prob2:a")
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, c.min_eigenvalue);
  rep.pass = rep.min_eigenvalue >= -tolerance * rep.scale;
  return rep;
}

/// H(k) = Lambda(k) - G(k) + A_K(k)' G(k+1) A_K(k) with A_K(k) = [I; K(k+1)] E(k),
/// and the terminal H(N-1) = Lambda - G(N-1) + E' Qf E. Returns min eigenvalues.
inline std::vector<double> h_residuals(const TimeVaryingSystem &sys, const CostSpec &cost,
                                       const DualSolution &sol, const GainSchedule &gains) {
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  detail::check_solution_shapes(sol, n, m, N);
  gains.validate(n, m, N);
  std::vector<double> out;
  for (std::size_t k = 0; k < N; ++k) {
    const StageMatrices st = stage_matrices(sys, cost, k);
    Matrix next;
    if (k + 1 < N) {
      Matrix T(n + m, n);
      T << Matrix::Identity(n, n), gains.K[k + 1];
      next = T.transpose() * sol.G[k + 1] * T;
    } else {
      next = cost.Qf;
    }
    out.push_back(linalg::min_eigenvalue(
        linalg::symmetrize(st.Lambda - sol.G[k] + st.E.transpose() * next * st.E)));
  }
  return out;
}

/// The oracle dual pair (Ghat, What = P(0)) as a DualSolution.
inline DualSolution oracle_solution(const TimeVaryingSystem &sys, const CostSpec &cost,
                                    const Matrix &Z) {
  const ValueMatrices vm = solve_dre(sys, cost);
  const QFunctionCertificate qc = qfunction_matrices(sys, cost, vm);
  DualSolution sol;
  sol.W = qc.W_hat;
  sol.G = qc.G_hat;
  sol.objective = (Z * sol.W).trace();
  return sol;
}

} // namespace ltvlq
