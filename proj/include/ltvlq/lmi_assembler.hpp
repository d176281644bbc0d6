#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "conic_program.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace ltvlq {

/// Flat coordinates for W (n x n) and G(0..N-1) ((n+m) x (n+m)). Each
/// symmetric matrix contributes its upper triangle, row by row; the pair
/// (i,j), (j,i) shares one coordinate.
class VariableLayout {
public:
  VariableLayout() = default;
  VariableLayout(Eigen::Index n, Eigen::Index m, std::size_t N) : n_(n), m_(m), N_(N) {
    if (n < 1 || m < 1 || N < 1)
      throw InputError("variable layout: n, m, N must be >= 1");
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  std::size_t horizon() const { return N_; }
  Eigen::Index block_dim() const { return n_ + m_; }

  std::size_t w_count() const { return tri(n_); }
  std::size_t g_count() const { return tri(n_ + m_); }
  std::size_t size() const { return w_count() + N_ * g_count(); }

  std::size_t w_index(Eigen::Index i, Eigen::Index j) const { return tri_index(i, j, n_); }
  std::size_t g_index(std::size_t k, Eigen::Index i, Eigen::Index j) const {
    return w_count() + k * g_count() + tri_index(i, j, n_ + m_);
  }
  std::size_t g_offset(std::size_t k) const { return w_count() + k * g_count(); }

  Vector pack(const Matrix &W, const std::vector<Matrix> &G) const {
    linalg::require_shape(W, n_, n_, "pack W");
    if (G.size() != N_)
      throw InputError("pack: expected " + std::to_string(N_) + " G matrices");
    Vector y(static_cast<Eigen::Index>(size()));
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = i; j < n_; ++j)
        y(static_cast<Eigen::Index>(w_index(i, j))) = 0.5 * (W(i, j) + W(j, i));
    const auto p = n_ + m_;
    for (std::size_t k = 0; k < N_; ++k) {
      linalg::require_shape(G[k], p, p, "pack G(" + std::to_string(k) + ")");
      for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i; j < p; ++j)
          y(static_cast<Eigen::Index>(g_index(k, i, j))) = 0.5 * (G[k](i, j) + G[k](j, i));
    }
    return y;
  }

  static std::size_t tri(Eigen::Index d) {
    return static_cast<std::size_t>(d * (d + 1) / 2);
  }

private:
  static std::size_t tri_index(Eigen::Index i, Eigen::Index j, Eigen::Index d) {
    if (i > j)
      std::swap(i, j);
    if (i < 0 || j >= d)
      throw InputError("variable layout: index out of range");
    // rows 0..i-1 contribute d, d-1, ..., d-i+1 entries
    return static_cast<std::size_t>(i * d - i * (i - 1) / 2 + (j - i));
  }

  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  std::size_t N_ = 0;
};

/// W and G(0..N-1) recovered from a solver vector.
struct DualSolution {
  Matrix W;
  std::vector<Matrix> G;
  double objective = 0.0; // trace(Z W) for the Z used at assembly

  Eigen::Index n() const { return W.rows(); }
  Matrix G11(std::size_t k) const { return linalg::block11(G[k], n()); }
  Matrix G12(std::size_t k) const { return linalg::block12(G[k], n()); }
  Matrix G22(std::size_t k) const { return linalg::block22(G[k], n()); }
};

inline DualSolution extract_dual_solution(const VariableLayout &layout, const Vector &y) {
  if (y.size() != static_cast<Eigen::Index>(layout.size()))
    throw InputError("extract: vector length " + std::to_string(y.size()) +
                     " does not match layout size " + std::to_string(layout.size()));
  const auto n = layout.n(), p = layout.block_dim();
  DualSolution sol;
  sol.W.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      sol.W(i, j) = sol.W(j, i) = y(static_cast<Eigen::Index>(layout.w_index(i, j)));
  sol.G.assign(layout.horizon(), Matrix(p, p));
  for (std::size_t k = 0; k < layout.horizon(); ++k)
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i; j < p; ++j)
        sol.G[k](i, j) = sol.G[k](j, i) =
            y(static_cast<Eigen::Index>(layout.g_index(k, i, j)));
  sol.objective = sol.W.trace();
  return sol;
}

/// K(k) = -G22(k)^{-1} G12(k)'. Throws CertificationError when some G22(k)
/// has an eigenvalue at or below 1e-9 trace(G22)/m.
inline GainSchedule gains_from_dual(const DualSolution &sol) {
  GainSchedule gs;
  const auto n = sol.n();
  for (std::size_t k = 0; k < sol.G.size(); ++k) {
    const Matrix g22 = linalg::symmetrize(linalg::block22(sol.G[k], n));
    const double floor = 1e-9 * std::abs(g22.trace()) / static_cast<double>(g22.rows());
    const double lmin = linalg::min_eigenvalue(g22);
    if (!(lmin > floor) || !std::isfinite(lmin))
      throw CertificationError("G22(" + std::to_string(k) +
                               ") is not positive definite (min eigenvalue " +
                               std::to_string(lmin) + ")");
    Eigen::LDLT<Matrix> ldlt(g22);
    gs.K.push_back(-ldlt.solve(linalg::block12(sol.G[k], n).transpose()));
  }
  return gs;
}

struct AssemblyOptions {
  /// Drop the common null space of the data columns in each data LMI. The
  /// dropped directions lie in the kernel of every coefficient of the block,
  /// so the feasible set is unchanged; the reduced block has a strict
  /// interior, which the interior-point solver needs.
  bool reduce_data_nullspace = true;
  /// Apply an invertible congruence to each data LMI so that its data
  /// columns become orthonormal (whitening). PSD-ness, hence the feasible
  /// set, is unchanged; the conditioning of the interior-point iterations
  /// improves by roughly cond(D_k)^2.
  bool whiten_data = true;
  double rank_tol = kRankTol;
};

namespace detail {

// Accumulates F0 and per-variable coefficients of one LMI block.
class BlockBuilder {
public:
  BlockBuilder(Eigen::Index size, std::string label)
      : size_(size), constant_(Matrix::Zero(size, size)), label_(std::move(label)) {}

  void add_constant(const Matrix &c) { constant_ += c; }

  // Adds sign * T' X T where X is the symmetric variable whose (i,j) entry
  // lives at index(i,j), T is d x size.
  template <typename IndexFn>
  void add_congruence(const Matrix &T, Eigen::Index d, IndexFn index, double sign) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const Vector ti = T.row(i).transpose();
      for (Eigen::Index j = i; j < d; ++j) {
        const Vector tj = T.row(j).transpose();
        if (ti.isZero(0.0) || tj.isZero(0.0))
          continue;
        Matrix coef = (i == j) ? Matrix(ti * ti.transpose())
                               : Matrix(ti * tj.transpose() + tj * ti.transpose());
        auto &slot = coefs_[index(i, j)];
        if (slot.size() == 0)
          slot = Matrix::Zero(size_, size_);
        slot += sign * coef;
      }
    }
  }

  LmiBlock build() const {
    LmiBlock b;
    b.size = size_;
    b.constant = linalg::symmetrize(constant_);
    b.label = label_;
    for (const auto &[var, coef] : coefs_)
      if (!coef.isZero(0.0))
        b.terms.push_back({var, linalg::symmetrize(coef)});
    return b;
  }

private:
  Eigen::Index size_;
  Matrix constant_;
  std::map<std::size_t, Matrix> coefs_;
  std::string label_;
};

// One transition k -> k+1 in congruence form: the model-based problem uses
// (P, C) = (E(k), I), the data problems (X_{k+1}, D_k) or (sqrt(g) X_L, L).
struct StepData {
  Matrix P; // n x q
  Matrix C; // (n+m) x q
};

// Orthonormal basis of the row space of [C; P] (q x r).
inline Matrix data_row_space(const StepData &sd, double rank_tol) {
  Matrix stacked(sd.C.rows() + sd.P.rows(), sd.C.cols());
  stacked << sd.C, sd.P;
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const auto &s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * s(0))
      ++r;
  return svd.matrixV().leftCols(r);
}

inline StepData reduce(const StepData &sd, double rank_tol) {
  const Matrix V = data_row_space(sd, rank_tol);
  if (V.cols() == sd.C.cols())
    return sd;
  return StepData{sd.P * V, sd.C * V};
}

// Right congruence by T = V diag(1/s, c): V from the SVD C = U S V', the
// first rank(C) columns whitened, the remaining ones (directions seen only by
// P) scaled to unit norm under P. T is square and invertible.
inline StepData whiten(const StepData &sd) {
  Eigen::JacobiSVD<Matrix> svd(sd.C, Eigen::ComputeFullV);
  const Vector &s = svd.singularValues();
  const Matrix &V = svd.matrixV();
  const auto q = sd.C.cols();
  Vector scale = Vector::Ones(q);
  const double smax = s.size() > 0 ? s(0) : 0.0;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (i < s.size() && s(i) > 1e-12 * smax) {
      scale(i) = 1.0 / s(i);
    } else {
      const double pn = (sd.P * V.col(i)).norm();
      scale(i) = pn > 0.0 ? 1.0 / pn : 1.0;
    }
  }
  const Matrix T = V * scale.asDiagonal();
  return StepData{sd.P * T, sd.C * T};
}

// Shared assembly for Problems 3-5:
//   block 0:    G(0) - blkdiag(W, 0) >= 0
//   block k+1:  [P' 0; 0 I] G(k+1) [P 0; 0 I] - [C 0]'(G(k) - Lambda(k))[C 0] >= 0
//   terminal:   P' Qf P - C'(G(N-1) - Lambda(N-1)) C >= 0
inline ConicProgram assemble(const std::vector<StepData> &steps,
                             const std::vector<Matrix> &Lambda, const Matrix &Qf,
                             const Matrix &Z, Eigen::Index n, Eigen::Index m,
                             const std::string &stage_label,
                             const std::string &terminal_label) {
  const std::size_t N = steps.size();
  const VariableLayout layout(n, m, N);
  const auto p = n + m;
  ConicProgram prog;
  prog.num_vars = layout.size();
  prog.objective = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      prog.objective(static_cast<Eigen::Index>(layout.w_index(i, j))) =
          (i == j) ? Z(i, i) : Z(i, j) + Z(j, i);

  auto g_of = [&](std::size_t k) {
    return [&layout, k](Eigen::Index i, Eigen::Index j) { return layout.g_index(k, i, j); };
  };

  {
    BlockBuilder bb(p, "prob3:b");
    bb.add_congruence(Matrix::Identity(p, p), p, g_of(0), 1.0);
    Matrix Tw = Matrix::Zero(n, p);
    Tw.leftCols(n).setIdentity();
    bb.add_congruence(Tw, n,
                      [&layout](Eigen::Index i, Eigen::Index j) { return layout.w_index(i, j); },
                      -1.0);
    prog.blocks.push_back(bb.build());
  }

  for (std::size_t k = 0; k + 1 < N; ++k) {
    const StepData &sd = steps[k];
    const auto q = sd.C.cols();
    BlockBuilder bb(q + m, stage_label + "[" + std::to_string(k) + "]");
    Matrix T = Matrix::Zero(p, q + m);
    T.topLeftCorner(n, q) = sd.P;
    T.bottomRightCorner(m, m).setIdentity();
    bb.add_congruence(T, p, g_of(k + 1), 1.0);
    Matrix U = Matrix::Zero(p, q + m);
    U.leftCols(q) = sd.C;
    bb.add_congruence(U, p, g_of(k), -1.0);
    bb.add_constant(U.transpose() * Lambda[k] * U);
    prog.blocks.push_back(bb.build());
  }

  {
    const StepData &sd = steps[N - 1];
    BlockBuilder bb(sd.C.cols(), terminal_label);
    bb.add_constant(sd.P.transpose() * Qf * sd.P + sd.C.transpose() * Lambda[N - 1] * sd.C);
    bb.add_congruence(sd.C, p, g_of(N - 1), -1.0);
    prog.blocks.push_back(bb.build());
  }
  return prog;
}

} // namespace detail

/// Model-based program: maximize trace(Z W) subject to the N+1 LMIs built
/// from E(k) = sqrt(gamma)[A(k) B(k)] and Lambda(k).
inline ConicProgram assemble_model_based(const TimeVaryingSystem &sys, const CostSpec &cost,
                                         const Matrix &Z) {
  sys.validate();
  cost.validate_against(sys);
  const auto n = sys.n(), m = sys.m();
  linalg::require_shape(Z, n, n, "Z");
  if (linalg::asymmetry(Z) > kSymmetryTol || linalg::min_eigenvalue(Z) <= 0.0)
    throw InputError("Z must be symmetric positive definite");
  std::vector<detail::StepData> steps;
  std::vector<Matrix> Lambda;
  for (std::size_t k = 0; k < sys.horizon(); ++k) {
    const StageMatrices st = stage_matrices(sys, cost, k);
    steps.push_back({st.E, Matrix::Identity(n + m, n + m)});
    Lambda.push_back(st.Lambda);
  }
  return detail::assemble(steps, Lambda, cost.Qf, linalg::symmetrize(Z), n, m, "prob3:c",
                          "prob3:terminal");
}

inline ConicProgram assemble_model_based(const TimeVaryingSystem &sys, const CostSpec &cost) {
  return assemble_model_based(sys, cost, Matrix::Identity(sys.n(), sys.n()));
}

/// Data-driven program for time-varying plants: maximize trace(W) with the
/// LMIs expressed through X_{k+1} and D_k. Throws RankError naming the first
/// k whose D_k is not full row rank.
inline ConicProgram assemble_model_free_ltv(const DataEnsemble &ens, const CostSpec &cost,
                                            const AssemblyOptions &opts = {}) {
  ens.validate();
  const auto n = ens.n(), m = ens.m();
  const std::size_t N = ens.horizon();
  if (cost.horizon() != N)
    throw InputError("cost horizon does not match ensemble horizon");
  const RichnessReport rich = check_richness(ens, opts.rank_tol);
  if (auto bad = rich.first_failure())
    throw RankError(*bad, "data matrix D_" + std::to_string(*bad) +
                              " is not full row rank (rank " +
                              std::to_string(rich.steps[*bad].rank) + " < " +
                              std::to_string(n + m) + ")");
  std::vector<detail::StepData> steps;
  std::vector<Matrix> Lambda;
  for (std::size_t k = 0; k < N; ++k) {
    linalg::require_shape(cost.Q[k], n, n, "Q(" + std::to_string(k) + ")");
    linalg::require_shape(cost.R[k], m, m, "R(" + std::to_string(k) + ")");
    detail::StepData sd{ens.X[k + 1], ens.D[k]};
    if (opts.reduce_data_nullspace)
      sd = detail::reduce(sd, opts.rank_tol);
    if (opts.whiten_data)
      sd = detail::whiten(sd);
    steps.push_back(std::move(sd));
    Lambda.push_back(linalg::blkdiag(cost.Q[k], cost.R[k]));
  }
  linalg::require_shape(cost.Qf, n, n, "Qf");
  return detail::assemble(steps, Lambda, cost.Qf, Matrix::Identity(n, n), n, m, "eq86",
                          "eq85");
}

/// Data-driven program for time-invariant plants from one trajectory.
inline ConicProgram assemble_model_free_lti(const LtiTrajectoryData &data, const Matrix &Q,
                                            const Matrix &R, const Matrix &Qf, double gamma,
                                            std::size_t N,
                                            const AssemblyOptions &opts = {}) {
  const auto n = data.n(), m = data.m();
  if (N < 1)
    throw InputError("horizon must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InputError("discount must lie in (0, 1]");
  linalg::require_shape(Q, n, n, "Q");
  linalg::require_shape(R, m, m, "R");
  linalg::require_shape(Qf, n, n, "Qf");
  const StepRichness rich = check_lti_richness(data, opts.rank_tol);
  if (!rich.pass)
    throw RankError(data.k0, "trajectory data matrix L is not full row rank (rank " +
                                 std::to_string(rich.rank) + " < " +
                                 std::to_string(n + m) + ")");
  const double sg = std::sqrt(gamma);
  detail::StepData sd{gamma == 1.0 ? data.X_L : Matrix(sg * data.X_L), data.L};
  if (opts.reduce_data_nullspace)
    sd = detail::reduce(sd, opts.rank_tol);
  if (opts.whiten_data)
    sd = detail::whiten(sd);
  const std::vector<detail::StepData> steps(N, sd);
  const std::vector<Matrix> Lambda(N, linalg::blkdiag(Q, R));
  return detail::assemble(steps, Lambda, Qf, Matrix::Identity(n, n), n, m, "prob5",
                          "prob5:terminal");
}

} // namespace ltvlq
