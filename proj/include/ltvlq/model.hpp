#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace ltvlq {

/// Relative symmetry tolerance applied when ingesting Q(k) and Qf.
inline constexpr double kSymmetryTol = 1e-10;
/// Floor on the eigenvalues of R(k).
inline constexpr double kPdFloor = 1e-12;

/// x(k+1) = A(k) x(k) + B(k) u(k), k = 0..N-1.
struct TimeVaryingSystem {
  std::vector<Matrix> A;
  std::vector<Matrix> B;

  Eigen::Index n() const { return A.empty() ? 0 : A.front().rows(); }
  Eigen::Index m() const { return B.empty() ? 0 : B.front().cols(); }
  std::size_t horizon() const { return A.size(); }

  void validate() const {
    if (A.empty() || A.size() != B.size())
      throw InputError("system: A and B must hold the same nonzero number of "
                       "steps");
    const auto nx = n(), nu = m();
    if (nx < 1 || nu < 1)
      throw InputError("system: state and input dimensions must be >= 1");
    for (std::size_t k = 0; k < A.size(); ++k) {
      linalg::require_shape(A[k], nx, nx, "system A(" + std::to_string(k) + ")");
      linalg::require_shape(B[k], nx, nu, "system B(" + std::to_string(k) + ")");
      if (!A[k].allFinite() || !B[k].allFinite())
        throw InputError("system: non-finite entry at step " +
                         std::to_string(k));
    }
  }
};

/// Discounted quadratic cost with stage weights Q(k), R(k) and terminal Qf.
struct CostSpec {
  std::vector<Matrix> Q;
  std::vector<Matrix> R;
  Matrix Qf;
  double gamma = 1.0;

  std::size_t horizon() const { return Q.size(); }

  /// Symmetrizes the weights after checking they are symmetric to
  /// kSymmetryTol, then checks Q, Qf PSD and R PD.
  void normalize() {
    auto ingest = [](Matrix &w, const std::string &name) {
      if (w.rows() != w.cols())
        throw InputError(name + " must be square");
      if (!w.allFinite())
        throw InputError(name + " has non-finite entries");
      if ((w - w.transpose()).norm() > kSymmetryTol * std::max(1.0, w.norm()))
        throw InputError(name + " is not symmetric");
      w = linalg::symmetrize(w);
    };
    if (Q.empty() || Q.size() != R.size())
      throw InputError("cost: Q and R must hold the same nonzero number of "
                       "steps");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw InputError("cost: discount must lie in (0, 1]");
    for (std::size_t k = 0; k < Q.size(); ++k) {
      ingest(Q[k], "Q(" + std::to_string(k) + ")");
      ingest(R[k], "R(" + std::to_string(k) + ")");
      if (linalg::min_eigenvalue(Q[k]) < -kSymmetryTol * std::max(1.0, Q[k].norm()))
        throw InputError("Q(" + std::to_string(k) + ") is not PSD");
      if (linalg::min_eigenvalue(R[k]) < kPdFloor)
        throw InputError("R(" + std::to_string(k) + ") is not PD");
    }
    ingest(Qf, "Qf");
    if (linalg::min_eigenvalue(Qf) < -kSymmetryTol * std::max(1.0, Qf.norm()))
      throw InputError("Qf is not PSD");
  }

  void validate_against(const TimeVaryingSystem &sys) const {
    if (Q.size() != sys.horizon())
      throw InputError("cost horizon does not match system horizon");
    for (std::size_t k = 0; k < Q.size(); ++k) {
      linalg::require_shape(Q[k], sys.n(), sys.n(), "Q(" + std::to_string(k) + ")");
      linalg::require_shape(R[k], sys.m(), sys.m(), "R(" + std::to_string(k) + ")");
    }
    linalg::require_shape(Qf, sys.n(), sys.n(), "Qf");
  }
};

/// Lambda(k) = blkdiag(Q(k), R(k)); E(k) = sqrt(gamma) [A(k) B(k)].
struct StageMatrices {
  Matrix Lambda;
  Matrix E;
};

enum class TrajectoryOrigin { open_loop, closed_loop, nonlinear };

struct Trajectory {
  std::vector<Vector> states; // x(0..N)
  std::vector<Vector> inputs; // u(0..N-1)
  TrajectoryOrigin origin = TrajectoryOrigin::open_loop;

  std::size_t horizon() const { return inputs.size(); }
};

/// u(k) = K(k) x(k).
struct GainSchedule {
  std::vector<Matrix> K;

  std::size_t horizon() const { return K.size(); }

  void validate(Eigen::Index n, Eigen::Index m, std::size_t N) const {
    if (K.size() != N)
      throw InputError("gain schedule has " + std::to_string(K.size()) +
                       " entries, expected " + std::to_string(N));
    for (std::size_t k = 0; k < K.size(); ++k) {
      linalg::require_shape(K[k], m, n, "K(" + std::to_string(k) + ")");
      if (!K[k].allFinite())
        throw InputError("K(" + std::to_string(k) + ") is not finite");
    }
  }
};

/// Generic state transition (k, x, u) -> x(k+1).
struct NonlinearStepper {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::function<Vector(std::size_t, const Vector &, const Vector &)> step;
};

inline NonlinearStepper as_stepper(const TimeVaryingSystem &sys) {
  return NonlinearStepper{sys.n(), sys.m(),
                          [sys](std::size_t k, const Vector &x, const Vector &u) {
                            return Vector(sys.A[k] * x + sys.B[k] * u);
                          }};
}

inline StageMatrices stage_matrices(const TimeVaryingSystem &sys,
                                    const CostSpec &cost, std::size_t k) {
  if (k >= sys.horizon() || k >= cost.horizon())
    throw InputError("stage index " + std::to_string(k) + " out of range");
  const auto n = sys.n(), m = sys.m();
  StageMatrices st;
  st.Lambda = linalg::blkdiag(cost.Q[k], cost.R[k]);
  st.E.resize(n, n + m);
  const double s = std::sqrt(cost.gamma);
  st.E.leftCols(n) = s * sys.A[k];
  st.E.rightCols(m) = s * sys.B[k];
  return st;
}

inline Trajectory simulate_open_loop(const TimeVaryingSystem &sys,
                                     const Vector &x0,
                                     const std::vector<Vector> &inputs) {
  if (inputs.size() != sys.horizon())
    throw InputError("open loop: input sequence length does not match horizon");
  if (x0.size() != sys.n() || !x0.allFinite())
    throw InputError("open loop: bad initial state");
  Trajectory traj;
  traj.origin = TrajectoryOrigin::open_loop;
  traj.states.reserve(sys.horizon() + 1);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < sys.horizon(); ++k) {
    if (inputs[k].size() != sys.m())
      throw InputError("open loop: input " + std::to_string(k) +
                       " has wrong dimension");
    traj.states.push_back(sys.A[k] * traj.states.back() + sys.B[k] * inputs[k]);
  }
  traj.inputs = inputs;
  return traj;
}

inline Trajectory simulate_closed_loop(const TimeVaryingSystem &sys,
                                       const GainSchedule &gains,
                                       const Vector &x0) {
  gains.validate(sys.n(), sys.m(), sys.horizon());
  if (x0.size() != sys.n())
    throw InputError("closed loop: bad initial state dimension");
  Trajectory traj;
  traj.origin = TrajectoryOrigin::closed_loop;
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < sys.horizon(); ++k) {
    const Vector &x = traj.states.back();
    Vector u = gains.K[k] * x;
    Vector next = sys.A[k] * x + sys.B[k] * u;
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

/// Open-loop rollout of a generic stepper. Throws DivergenceError naming the
/// first step whose successor state is not finite.
inline Trajectory simulate_nonlinear_open_loop(const NonlinearStepper &plant,
                                               const Vector &x0,
                                               const std::vector<Vector> &inputs) {
  if (x0.size() != plant.n)
    throw InputError("nonlinear rollout: bad initial state dimension");
  Trajectory traj;
  traj.origin = TrajectoryOrigin::nonlinear;
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() != plant.m)
      throw InputError("nonlinear rollout: input dimension mismatch");
    Vector next = plant.step(k, traj.states.back(), inputs[k]);
    if (!next.allFinite())
      throw DivergenceError(k, "non-finite state at step " + std::to_string(k));
    traj.states.push_back(std::move(next));
  }
  traj.inputs = inputs;
  return traj;
}

inline Trajectory simulate_nonlinear_closed_loop(const NonlinearStepper &plant,
                                                 const GainSchedule &gains,
                                                 const Vector &x0) {
  gains.validate(plant.n, plant.m, gains.horizon());
  if (x0.size() != plant.n)
    throw InputError("nonlinear closed loop: bad initial state dimension");
  Trajectory traj;
  traj.origin = TrajectoryOrigin::nonlinear;
  traj.states.push_back(x0);
  for (std::size_t k = 0; k < gains.horizon(); ++k) {
    const Vector &x = traj.states.back();
    Vector u = gains.K[k] * x;
    Vector next = plant.step(k, x, u);
    if (!next.allFinite())
      throw DivergenceError(k, "non-finite state at step " + std::to_string(k));
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

/// J = gamma^N x(N)'Qf x(N) + sum_k gamma^k [x(k)'Q(k)x(k) + u(k)'R(k)u(k)].
inline double evaluate_cost(const CostSpec &cost, const Trajectory &traj) {
  const std::size_t N = cost.horizon();
  if (traj.inputs.size() != N || traj.states.size() != N + 1)
    throw InputError("cost: trajectory length does not match cost horizon");
  double J = 0.0, disc = 1.0;
  for (std::size_t k = 0; k < N; ++k) {
    const Vector &x = traj.states[k];
    const Vector &u = traj.inputs[k];
    if (x.size() != cost.Q[k].rows() || u.size() != cost.R[k].rows())
      throw InputError("cost: dimension mismatch at step " + std::to_string(k));
    J += disc * (x.dot(cost.Q[k] * x) + u.dot(cost.R[k] * u));
    disc *= cost.gamma;
  }
  const Vector &xN = traj.states[N];
  J += disc * xN.dot(cost.Qf * xN);
  return J;
}

} // namespace ltvlq
