#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "conic_program.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace ltvlq {

enum class SolverStatus {
  optimal,
  max_iterations,
  primal_infeasible, // the LMI system has no solution
  dual_infeasible,   // the LMI objective is unbounded
  numerical_failure,
};

inline const char *to_string(SolverStatus s) {
  switch (s) {
  case SolverStatus::optimal:
    return "optimal";
  case SolverStatus::max_iterations:
    return "max-iterations";
  case SolverStatus::primal_infeasible:
    return "primal-infeasible-certificate";
  case SolverStatus::dual_infeasible:
    return "dual-infeasible-certificate";
  case SolverStatus::numerical_failure:
    return "numerical-failure";
  }
  return "unknown";
}

enum class SearchDirection { hkm, nt };

struct SolverOptions {
  int max_iterations = 200;
  SearchDirection direction = SearchDirection::nt;
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  double step_fraction = 0.98;
  bool predictor_corrector = true;
  int verbosity = 0;
  double infeas_tol = 1e-8;
  // When progress stalls, an iterate meeting this looser tolerance on gap and
  // residuals is reported as optimal (with a note in the message).
  double acceptable_tol = 1e-6;
  int stall_window = 15;
  int refinement_steps = 2;
  // Retry short corrected steps with a plain, more centered direction.
  bool recenter = true;

  void validate() const {
    if (max_iterations < 1)
      throw InputError("solver: max_iterations must be >= 1");
    if (!(gap_tol > 0.0) || !(feas_tol > 0.0) || !(infeas_tol > 0.0) ||
        !(acceptable_tol > 0.0))
      throw InputError("solver: tolerances must be positive");
    if (!(step_fraction > 0.0 && step_fraction < 1.0))
      throw InputError("solver: step_fraction must lie in (0, 1)");
    if (stall_window < 1 || refinement_steps < 0)
      throw InputError("solver: stall_window must be >= 1 and refinement_steps >= 0");
  }
};

struct IterationRecord {
  int iter = 0;
  double gap = 0.0;        // relative complementarity gap
  double primal_res = 0.0; // relative LMI residual
  double dual_res = 0.0;   // relative dual-equality residual
  double step_primal = 0.0;
  double step_dual = 0.0;
  double min_eig_slack = 0.0;
  double min_eig_multiplier = 0.0;
};

struct SolverResult {
  SolverStatus status = SolverStatus::numerical_failure;
  Vector y;
  std::vector<Matrix> slacks;      // S_b = F0_b + sum y_i F_i,b (up to residual)
  std::vector<Matrix> multipliers; // M_b
  double gap = 0.0;                // relative, sum <S_b,M_b> / (1+|c'y|+|<F0,M>|)
  double abs_gap = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double primal_objective = 0.0; // c'y
  double dual_objective = 0.0;   // <F0, M>
  int iterations = 0;
  double wall_time = 0.0;
  std::vector<IterationRecord> history;
  std::string message;

  bool ok() const { return status == SolverStatus::optimal; }
};

/// Writes the iteration log as CSV: iter,gap,primal_res,dual_res,step.
inline void write_iteration_log(std::ostream &os, const SolverResult &r) {
  os << "iter,gap,primal_res,dual_res,step\n";
  os << std::setprecision(17);
  for (const auto &h : r.history)
    os << h.iter << ',' << h.gap << ',' << h.primal_res << ',' << h.dual_res << ','
       << std::min(h.step_primal, h.step_dual) << '\n';
}

/// Infeasible-start primal-dual path-following method with Mehrotra
/// predictor-corrector. The search direction is NT by default (HKM on
/// request). The Schur complement is assembled as a sparse Gram matrix,
/// equilibrated and factored with a sparse Cholesky.
///
/// Internally the LMI program is treated as the dual of the standard form
/// with A_i = -F_i, C = F0, b = c: the LMI slack S plays the role of the dual
/// slack and the multiplier M the role of the primal matrix.
class SdpSolver {
  using SparseMatrix = Eigen::SparseMatrix<double>;

public:
  explicit SdpSolver(const ConicProgram &prog, SolverOptions opts = {})
      : prog_(prog), opts_(opts) {
    prog_.validate();
    opts_.validate();
  }

  SolverResult solve() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t nb = prog_.blocks.size();
    const auto nv = static_cast<Eigen::Index>(prog_.num_vars);
    const Vector &c = prog_.objective;

    double f0_norm = 0.0, f0_max = 0.0;
    Eigen::Index total_dim = 0;
    for (const auto &b : prog_.blocks) {
      f0_norm += b.constant.squaredNorm();
      if (b.constant.size() > 0)
        f0_max = std::max(f0_max, b.constant.cwiseAbs().maxCoeff());
      total_dim += b.size;
    }
    f0_norm = std::sqrt(f0_norm);
    const double c_norm = c.norm();
    const double c_max = nv > 0 ? c.cwiseAbs().maxCoeff() : 0.0;

    const double tau = 1.0 + std::max(f0_max, c_max);
    Vector y = Vector::Zero(nv);
    std::vector<Matrix> S(nb), M(nb), Sinv(nb), Rd(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto s = prog_.blocks[b].size;
      S[b] = tau * Matrix::Identity(s, s);
      M[b] = tau * Matrix::Identity(s, s);
    }

    SolverResult best;
    double best_merit = std::numeric_limits<double>::infinity();
    std::vector<IterationRecord> history;
    SolverStatus status = SolverStatus::max_iterations;
    std::string message;
    int stalled = 0;
    double last_step_p = 0.0, last_step_d = 0.0;

    auto snapshot = [&](double relgap, double absgap, double pres, double dres,
                        double pobj, double dobj, int iter) {
      SolverResult r;
      r.y = y;
      r.slacks = S;
      r.multipliers = M;
      r.gap = relgap;
      r.abs_gap = absgap;
      r.primal_res = pres;
      r.dual_res = dres;
      r.primal_objective = pobj;
      r.dual_objective = dobj;
      r.iterations = iter;
      return r;
    };

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    bool analyzed = false;

    int iter = 0;
    for (;; ++iter) {
      // Residuals and progress measures at the current iterate.
      Vector Rp = c; // c_i + sum_b <F_i, M_b>
      double rd_sq = 0.0, absgap = 0.0, dobj = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        const auto &blk = prog_.blocks[b];
        Rd[b] = blk.evaluate(y) - S[b];
        rd_sq += Rd[b].squaredNorm();
        absgap += S[b].cwiseProduct(M[b]).sum();
        dobj += blk.constant.cwiseProduct(M[b]).sum();
        for (const auto &t : blk.terms)
          Rp(static_cast<Eigen::Index>(t.var)) += t.coef.cwiseProduct(M[b]).sum();
      }
      const double pobj = c.dot(y);
      const double relgap = absgap / (1.0 + std::abs(pobj) + std::abs(dobj));
      const double pres = std::sqrt(rd_sq) / (1.0 + f0_norm);
      const double dres = Rp.norm() / (1.0 + c_norm);
      const double mu = absgap / static_cast<double>(std::max<Eigen::Index>(total_dim, 1));

      IterationRecord rec;
      rec.iter = iter;
      rec.gap = relgap;
      rec.primal_res = pres;
      rec.dual_res = dres;
      rec.step_primal = last_step_p;
      rec.step_dual = last_step_d;
      rec.min_eig_slack = std::numeric_limits<double>::infinity();
      rec.min_eig_multiplier = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < nb; ++b) {
        rec.min_eig_slack = std::min(rec.min_eig_slack, linalg::min_eigenvalue(S[b]));
        rec.min_eig_multiplier =
            std::min(rec.min_eig_multiplier, linalg::min_eigenvalue(M[b]));
      }
      history.push_back(rec);
      if (opts_.verbosity > 0)
        std::cerr << std::scientific << std::setprecision(3) << "iter " << iter
                  << " gap " << relgap << " pres " << pres << " dres " << dres
                  << " obj " << std::setprecision(12) << pobj << std::setprecision(3) << " step " << last_step_p << '/'
                  << last_step_d << '\n';

      const double merit = std::max({relgap, pres, dres});
      if (merit < best_merit) {
        best_merit = merit;
        best = snapshot(relgap, absgap, pres, dres, pobj, dobj, iter);
      }
      if (relgap <= opts_.gap_tol && pres <= opts_.feas_tol && dres <= opts_.feas_tol) {
        status = SolverStatus::optimal;
        best = snapshot(relgap, absgap, pres, dres, pobj, dobj, iter);
        break;
      }

      // Infeasibility certificates.
      if (dobj < 0.0 && (Rp - c).norm() / (-dobj) < opts_.infeas_tol) {
        status = SolverStatus::primal_infeasible;
        message = "multiplier ray certifies the LMI system is infeasible";
        best = snapshot(relgap, absgap, pres, dres, pobj, dobj, iter);
        break;
      }
      if (pobj > 0.0 && (f0_norm + std::sqrt(rd_sq)) / pobj < opts_.infeas_tol) {
        status = SolverStatus::dual_infeasible;
        message = "direction y certifies the LMI objective is unbounded";
        best = snapshot(relgap, absgap, pres, dres, pobj, dobj, iter);
        break;
      }
      const bool acceptable = best.gap <= opts_.acceptable_tol &&
                              best.primal_res <= opts_.acceptable_tol &&
                              best.dual_res <= opts_.acceptable_tol;
      if (acceptable && iter - best.iterations >= opts_.stall_window) {
        status = SolverStatus::optimal;
        message = "progress stalled; solved to reduced accuracy";
        break;
      }
      if (history.size() > 20 && !acceptable) {
        const auto &old = history[history.size() - 21];
        if (rec.gap >= 0.9 * old.gap) {
          if (rec.primal_res > 10.0 * old.primal_res && old.primal_res > 0.0) {
            status = SolverStatus::primal_infeasible;
            message = "LMI residual diverging while the gap stalls";
            break;
          }
          if (rec.dual_res > 10.0 * old.dual_res && old.dual_res > 0.0) {
            status = SolverStatus::dual_infeasible;
            message = "dual residual diverging while the gap stalls";
            break;
          }
        }
      }
      if (iter >= opts_.max_iterations) {
        status = SolverStatus::max_iterations;
        message = "iteration limit reached";
        break;
      }

      // Schur complement H_ij = sum_b <F_i, M F_j S^{-1}>.
      bool factor_ok = true;
      for (std::size_t b = 0; b < nb; ++b) {
        Eigen::LLT<Matrix> llt(S[b]);
        if (llt.info() != Eigen::Success) {
          factor_ok = false;
          break;
        }
        Sinv[b] = llt.solve(Matrix::Identity(S[b].rows(), S[b].cols()));
        Sinv[b] = linalg::symmetrize(Sinv[b]);
      }
      if (!factor_ok) {
        status = SolverStatus::numerical_failure;
        message = "slack lost positive definiteness";
        break;
      }
      // Scaling pair (P, Q): the linearized complementarity reads
      // dM = sigma mu S^{-1} - M - sym(P dS Q) - corr. HKM uses (M, S^{-1});
      // NT uses (W, W) with W S W = M.
      std::vector<Matrix> Ps(nb), Qs(nb), Gf(nb);
      // Near the boundary the NT factor can break down; such an iteration
      // falls back to HKM, which needs only S^{-1}.
      bool nt = opts_.direction == SearchDirection::nt;
      for (std::size_t b = 0; b < nb && nt; ++b) {
        Eigen::LLT<Matrix> ls(S[b]), lm(M[b]);
        if (ls.info() != Eigen::Success || lm.info() != Eigen::Success) {
          nt = false;
          break;
        }
        const Matrix Lm = lm.matrixL();
        Matrix LtR = ls.matrixU() * Lm;
        Eigen::JacobiSVD<Matrix> svd(LtR, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector d = svd.singularValues();
        if (!(d.minCoeff() > 0.0) || !d.allFinite()) {
          nt = false;
          break;
        }
        Gf[b] = Lm * svd.matrixV() * d.cwiseSqrt().cwiseInverse().asDiagonal();
        Ps[b] = linalg::symmetrize(Gf[b] * Gf[b].transpose());
        Qs[b] = Ps[b];
      }
      if (!nt)
        for (std::size_t b = 0; b < nb; ++b) {
          Ps[b] = M[b];
          Qs[b] = Sinv[b];
        }
      // NT: H_ij = <Y_i, Y_j> with Y_i = G' F_i G, a Gram matrix that stays
      // positive semidefinite in floating point. HKM: <F_i, M F_j S^{-1}>.
      // Each block couples only its own variables, so H is sparse (block
      // banded for the control programs).
      triplets.clear();
      Vector hdiag = Vector::Zero(nv);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto &terms = prog_.blocks[b].terms;
        std::vector<Matrix> Y(terms.size());
        for (std::size_t j = 0; j < terms.size(); ++j)
          Y[j] = nt ? Matrix(Gf[b].transpose() * terms[j].coef * Gf[b])
                     : Matrix(Ps[b] * terms[j].coef * Qs[b]);
        for (std::size_t i = 0; i < terms.size(); ++i) {
          const auto vi = static_cast<Eigen::Index>(terms[i].var);
          for (std::size_t j = i; j < terms.size(); ++j) {
            const auto vj = static_cast<Eigen::Index>(terms[j].var);
            double h;
            if (nt)
              h = Y[i].cwiseProduct(Y[j]).sum();
            else
              h = 0.5 * (terms[i].coef.cwiseProduct(Y[j].transpose()).sum() +
                         terms[j].coef.cwiseProduct(Y[i].transpose()).sum());
            triplets.emplace_back(vi, vj, h);
            if (i != j)
              triplets.emplace_back(vj, vi, h);
            else
              hdiag(vi) += h;
          }
        }
      }

      // Jacobi equilibration; Cholesky first, then LDL' with escalating shifts.
      const Vector dscale = hdiag.cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      for (auto &t : triplets)
        t = Eigen::Triplet<double>(t.row(), t.col(),
                                   t.value() * dscale(t.row()) * dscale(t.col()));
      for (Eigen::Index i = 0; i < nv; ++i)
        triplets.emplace_back(i, i, 0.0); // keep the diagonal in the pattern
      SparseMatrix Hs(nv, nv);
      Hs.setFromTriplets(triplets.begin(), triplets.end());
      if (!analyzed) {
        llt.analyzePattern(Hs);
        ldlt.analyzePattern(Hs);
        analyzed = true;
      }
      llt.factorize(Hs);
      const bool use_llt = llt.info() == Eigen::Success;
      bool solved = use_llt;
      for (double reg = 1e-14; !solved && reg <= 1e-4; reg *= 100.0) {
        SparseMatrix Hr = Hs;
        for (Eigen::Index i = 0; i < nv; ++i)
          Hr.coeffRef(i, i) += reg;
        ldlt.factorize(Hr);
        solved = ldlt.info() == Eigen::Success &&
                 (ldlt.vectorD().array() > 0.0).all();
      }
      if (!solved) {
        status = SolverStatus::numerical_failure;
        message = "Schur complement could not be factored";
        break;
      }
      auto schur_solve = [&](const Vector &r) -> Vector {
        const Vector rs = dscale.asDiagonal() * r;
        return dscale.asDiagonal() * (use_llt ? Vector(llt.solve(rs)) : Vector(ldlt.solve(rs)));
      };

      // Solves for (dy, dS, dM) given the centering target and corrector term.
      std::vector<Matrix> dS(nb), dM(nb);
      Vector dy(nv);
      auto direction = [&](double sigma_mu, const std::vector<Matrix> *corr) {
        Vector rhs = Rp;
        for (std::size_t b = 0; b < nb; ++b) {
          Matrix V = sigma_mu * Sinv[b] - M[b] - Ps[b] * Rd[b] * Qs[b];
          if (corr)
            V -= (*corr)[b];
          for (const auto &t : prog_.blocks[b].terms)
            rhs(static_cast<Eigen::Index>(t.var)) += t.coef.cwiseProduct(V).sum();
        }
        dy = schur_solve(rhs);
        auto expand = [&] {
          for (std::size_t b = 0; b < nb; ++b) {
            dS[b] = Rd[b];
            for (const auto &t : prog_.blocks[b].terms)
              dS[b].noalias() += dy(static_cast<Eigen::Index>(t.var)) * t.coef;
            dS[b] = linalg::symmetrize(dS[b]);
            Matrix T = sigma_mu * Sinv[b] - M[b] - Ps[b] * dS[b] * Qs[b];
            if (corr)
              T -= (*corr)[b];
            dM[b] = linalg::symmetrize(T);
          }
        };
        expand();
        // Refine against the exact operator: the step must cancel Rp.
        for (int r = 0; r < opts_.refinement_steps && dy.allFinite(); ++r) {
          Vector res = Rp;
          for (std::size_t b = 0; b < nb; ++b)
            for (const auto &t : prog_.blocks[b].terms)
              res(static_cast<Eigen::Index>(t.var)) += t.coef.cwiseProduct(dM[b]).sum();
          dy += schur_solve(res);
          expand();
        }
        return dy.allFinite();
      };
      auto max_steps = [&](double &as, double &am) {
        as = std::numeric_limits<double>::infinity();
        am = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < nb; ++b) {
          as = std::min(as, boundary_step(S[b], dS[b]));
          am = std::min(am, boundary_step(M[b], dM[b]));
        }
      };

      double sigma = 0.1;
      std::vector<Matrix> corr;
      bool use_corr = false;
      if (opts_.predictor_corrector) {
        if (!direction(0.0, nullptr)) {
          status = SolverStatus::numerical_failure;
          message = "predictor direction is not finite";
          break;
        }
        double as, am;
        max_steps(as, am);
        as = std::min(1.0, as);
        am = std::min(1.0, am);
        double gap_aff = 0.0;
        for (std::size_t b = 0; b < nb; ++b)
          gap_aff += (S[b] + as * dS[b]).cwiseProduct(M[b] + am * dM[b]).sum();
        const double ratio = std::clamp(gap_aff / std::max(absgap, 1e-300), 0.0, 1.0);
        sigma = ratio * ratio * ratio;
        corr.resize(nb);
        for (std::size_t b = 0; b < nb; ++b)
          corr[b] = dM[b] * dS[b] * Sinv[b];
        use_corr = true;
      }
      if (!direction(sigma * mu, use_corr ? &corr : nullptr)) {
        status = SolverStatus::numerical_failure;
        message = "search direction is not finite";
        break;
      }
      double as, am;
      max_steps(as, am);
      // Short corrected steps mean the iterate is losing centrality; a
      // plain, more centered direction usually recovers it.
      if (opts_.recenter && std::min(as, am) < 0.5) {
        const std::vector<Matrix> dS0 = dS, dM0 = dM;
        const Vector dy0 = dy;
        const double as0 = as, am0 = am;
        if (direction(std::max(sigma, 0.5) * mu, nullptr)) {
          max_steps(as, am);
          if (std::min(as, am) <= std::min(as0, am0)) {
            dS = dS0;
            dM = dM0;
            dy = dy0;
            as = as0;
            am = am0;
          }
        } else {
          dS = dS0;
          dM = dM0;
          dy = dy0;
          as = as0;
          am = am0;
        }
      }
      const double step_s = std::min(1.0, opts_.step_fraction * as);
      const double step_m = std::min(1.0, opts_.step_fraction * am);
      y += step_s * dy;
      for (std::size_t b = 0; b < nb; ++b) {
        S[b] = linalg::symmetrize(S[b] + step_s * dS[b]);
        M[b] = linalg::symmetrize(M[b] + step_m * dM[b]);
      }
      last_step_p = step_s;
      last_step_d = step_m;
      stalled = (step_s < 1e-10 && step_m < 1e-10) ? stalled + 1 : 0;
      if (stalled >= 3) {
        status = SolverStatus::numerical_failure;
        message = "step length collapsed";
        ++iter;
        break;
      }
    }

    if ((status == SolverStatus::numerical_failure ||
         status == SolverStatus::max_iterations) &&
        best.gap <= opts_.acceptable_tol && best.primal_res <= opts_.acceptable_tol &&
        best.dual_res <= opts_.acceptable_tol) {
      message = "solved to reduced accuracy (" + message + ")";
      status = SolverStatus::optimal;
    }
    SolverResult result = std::move(best);
    result.status = status;
    result.message = message;
    result.iterations = iter;
    result.history = std::move(history);
    if (result.y.size() == 0) {
      result.y = y;
      result.slacks = S;
      result.multipliers = M;
    }
    result.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

private:
  // Largest alpha with X + alpha dX >= 0 (X is PD); +inf when unbounded.
  static double boundary_step(const Matrix &X, const Matrix &dX) {
    Eigen::LLT<Matrix> llt(X);
    Matrix T = llt.matrixL().solve(dX);
    T = llt.matrixL().solve(T.transpose()).transpose();
    const double lmin = linalg::min_eigenvalue(T);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  ConicProgram prog_;
  SolverOptions opts_;
};

inline SolverResult solve(const ConicProgram &prog, const SolverOptions &opts = {}) {
  return SdpSolver(prog, opts).solve();
}

} // namespace ltvlq
