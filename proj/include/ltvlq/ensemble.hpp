#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace ltvlq {

/// Ratio sigma_min / sigma_max below which a data matrix is rank deficient.
inline constexpr double kRankTol = 1e-8;

enum class ExcitationKind { gaussian_white, sum_of_sinusoids, piecewise_constant };

struct ExcitationSpec {
  ExcitationKind kind = ExcitationKind::gaussian_white;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
  // sum_of_sinusoids: frequencies drawn uniformly in [freq_low, freq_high]
  // (cycles per sample), random phases.
  int sinusoid_count = 3;
  double freq_low = 0.02;
  double freq_high = 0.45;
  // piecewise_constant: levels uniform in [-amplitude, amplitude].
  int dwell = 3;

  void validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude))
      throw InputError("excitation amplitude must be positive");
    if (dwell < 1)
      throw InputError("excitation dwell must be >= 1");
    if (sinusoid_count < 1)
      throw InputError("excitation sinusoid count must be >= 1");
    if (!(freq_low >= 0.0 && freq_high >= freq_low))
      throw InputError("excitation frequency range is invalid");
  }
};

inline std::vector<Vector> generate_excitation(const ExcitationSpec &spec,
                                               Eigen::Index m, std::size_t N) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Vector> u(N, Vector::Zero(m));
  switch (spec.kind) {
  case ExcitationKind::gaussian_white: {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto &v : u)
      for (Eigen::Index i = 0; i < m; ++i)
        v(i) = spec.amplitude * nd(rng);
    break;
  }
  case ExcitationKind::sum_of_sinusoids: {
    std::uniform_real_distribution<double> freq(spec.freq_low, spec.freq_high);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    const double a = spec.amplitude / spec.sinusoid_count;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (int c = 0; c < spec.sinusoid_count; ++c) {
        const double f = freq(rng), ph = phase(rng);
        for (std::size_t k = 0; k < N; ++k)
          u[k](i) += a * std::sin(2.0 * M_PI * f * static_cast<double>(k) + ph);
      }
    }
    break;
  }
  case ExcitationKind::piecewise_constant: {
    std::uniform_real_distribution<double> level(-spec.amplitude, spec.amplitude);
    Vector held(m);
    for (std::size_t k = 0; k < N; ++k) {
      if (k % static_cast<std::size_t>(spec.dwell) == 0)
        for (Eigen::Index i = 0; i < m; ++i)
          held(i) = level(rng);
      u[k] = held;
    }
    break;
  }
  }
  return u;
}

/// Discounted data matrices from l experiments:
///   X_k = gamma^{k/2} [x_1(k) .. x_l(k)],  U_k likewise,  D_k = [X_k; U_k].
struct DataEnsemble {
  std::size_t l = 0;
  std::vector<Matrix> X; // k = 0..N
  std::vector<Matrix> U; // k = 0..N-1
  std::vector<Matrix> D; // k = 0..N-1
  double gamma = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  std::size_t horizon() const { return U.size(); }
  Eigen::Index n() const { return X.empty() ? 0 : X.front().rows(); }
  Eigen::Index m() const { return U.empty() ? 0 : U.front().rows(); }

  void validate() const {
    const std::size_t N = U.size();
    if (N == 0 || X.size() != N + 1 || D.size() != N)
      throw InputError("ensemble: inconsistent number of time steps");
    const auto nx = n(), nu = m();
    const auto cols = static_cast<Eigen::Index>(l);
    for (std::size_t k = 0; k <= N; ++k)
      linalg::require_shape(X[k], nx, cols, "ensemble X(" + std::to_string(k) + ")");
    for (std::size_t k = 0; k < N; ++k) {
      linalg::require_shape(U[k], nu, cols, "ensemble U(" + std::to_string(k) + ")");
      linalg::require_shape(D[k], nx + nu, cols, "ensemble D(" + std::to_string(k) + ")");
    }
  }

  /// Rebuilds every D_k from X_k and U_k.
  void restack() {
    D.resize(U.size());
    for (std::size_t k = 0; k < U.size(); ++k) {
      D[k].resize(X[k].rows() + U[k].rows(), X[k].cols());
      D[k] << X[k], U[k];
    }
  }
};

using Plant = std::variant<TimeVaryingSystem, NonlinearStepper>;

/// Runs one open-loop experiment per (initial state, input sequence) pair and
/// records discounted samples. Measurement noise N(0, sigma^2) is added to the
/// recorded states only; the standard normal draws are taken for every entry
/// regardless of sigma, so ensembles that differ only in sigma share noise
/// directions.
inline DataEnsemble collect_ensemble(const Plant &plant,
                                     const std::vector<Vector> &init_states,
                                     const std::vector<std::vector<Vector>> &inputs,
                                     double gamma, double noise_sigma,
                                     std::uint64_t seed) {
  if (init_states.empty() || init_states.size() != inputs.size())
    throw InputError("ensemble: need one input sequence per initial state");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InputError("ensemble: discount must lie in (0, 1]");
  if (!(noise_sigma >= 0.0))
    throw InputError("ensemble: noise sigma must be nonnegative");
  const NonlinearStepper stepper = std::visit(
      [](const auto &p) -> NonlinearStepper {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, TimeVaryingSystem>) {
          p.validate();
          return as_stepper(p);
        } else {
          return p;
        }
      },
      plant);
  const std::size_t N = inputs.front().size();
  if (std::holds_alternative<TimeVaryingSystem>(plant) &&
      std::get<TimeVaryingSystem>(plant).horizon() != N)
    throw InputError("ensemble: input length does not match system horizon");
  const std::size_t l = init_states.size();
  const auto n = stepper.n, m = stepper.m;

  DataEnsemble ens;
  ens.l = l;
  ens.gamma = gamma;
  ens.noise_sigma = noise_sigma;
  ens.seed = seed;
  ens.X.assign(N + 1, Matrix::Zero(n, static_cast<Eigen::Index>(l)));
  ens.U.assign(N, Matrix::Zero(m, static_cast<Eigen::Index>(l)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t j = 0; j < l; ++j) {
    if (inputs[j].size() != N)
      throw InputError("ensemble: input sequences must share one length");
    Trajectory traj;
    try {
      traj = simulate_nonlinear_open_loop(stepper, init_states[j], inputs[j]);
    } catch (const DivergenceError &e) {
      throw DivergenceError(j, "experiment " + std::to_string(j) +
                                   " diverged: " + e.what());
    }
    const auto col = static_cast<Eigen::Index>(j);
    for (std::size_t k = 0; k <= N; ++k) {
      const double scale = std::pow(gamma, 0.5 * static_cast<double>(k));
      Vector noise(n);
      for (Eigen::Index i = 0; i < n; ++i)
        noise(i) = noise_sigma * nd(rng);
      ens.X[k].col(col) = scale * (traj.states[k] + noise);
      if (k < N)
        ens.U[k].col(col) = scale * traj.inputs[k];
    }
  }
  ens.restack();
  return ens;
}

struct StepRichness {
  std::size_t k = 0;
  Eigen::Index rank = 0;
  double sigma_min = 0.0; // (n+m)-th singular value, 0 when l < n+m
  double sigma_max = 0.0;
  bool pass = false;
};

struct RichnessReport {
  std::vector<StepRichness> steps;
  bool pass = false;

  std::optional<std::size_t> first_failure() const {
    for (const auto &s : steps)
      if (!s.pass)
        return s.k;
    return std::nullopt;
  }
};

/// Full-row-rank test of an (n+m) x l data matrix.
inline StepRichness data_matrix_richness(const Matrix &D, std::size_t k,
                                         double rank_tol = kRankTol) {
  StepRichness r;
  r.k = k;
  const Eigen::Index target = D.rows();
  Eigen::JacobiSVD<Matrix> svd(D);
  const auto &s = svd.singularValues();
  r.sigma_max = s.size() > 0 ? s(0) : 0.0;
  r.sigma_min = s.size() >= target ? s(target - 1) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * r.sigma_max)
      ++r.rank;
  r.pass = r.rank == target && r.sigma_max > 0.0 &&
           r.sigma_min > rank_tol * r.sigma_max;
  return r;
}

inline RichnessReport check_richness(const DataEnsemble &ens,
                                     double rank_tol = kRankTol) {
  RichnessReport rep;
  rep.pass = true;
  for (std::size_t k = 0; k < ens.D.size(); ++k) {
    rep.steps.push_back(data_matrix_richness(ens.D[k], k, rank_tol));
    rep.pass = rep.pass && rep.steps.back().pass;
  }
  return rep;
}

/// Single-trajectory data for time-invariant plants:
///   L   = [x(k0) .. x(k0+s-1); u(k0) .. u(k0+s-1)]
///   X_L = [x(k0+1) .. x(k0+s)]
struct LtiTrajectoryData {
  Matrix L;
  Matrix X_L;
  std::size_t s = 0;
  std::size_t k0 = 0;

  Eigen::Index n() const { return X_L.rows(); }
  Eigen::Index m() const { return L.rows() - X_L.rows(); }
};

inline LtiTrajectoryData build_lti_trajectory_data(const Trajectory &traj,
                                                   Eigen::Index n, Eigen::Index m,
                                                   std::size_t k0,
                                                   std::size_t s = 0) {
  if (s == 0)
    s = static_cast<std::size_t>(n + m);
  if (traj.states.size() < k0 + s + 1 || traj.inputs.size() < k0 + s)
    throw InputError("LTI data: trajectory too short for k0=" +
                     std::to_string(k0) + ", s=" + std::to_string(s));
  LtiTrajectoryData d;
  d.s = s;
  d.k0 = k0;
  d.L.resize(n + m, static_cast<Eigen::Index>(s));
  d.X_L.resize(n, static_cast<Eigen::Index>(s));
  for (std::size_t j = 0; j < s; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    linalg::require_shape(traj.states[k0 + j], n, 1, "LTI data state");
    linalg::require_shape(traj.inputs[k0 + j], m, 1, "LTI data input");
    d.L.col(c) << traj.states[k0 + j], traj.inputs[k0 + j];
    d.X_L.col(c) = traj.states[k0 + j + 1];
  }
  return d;
}

inline StepRichness check_lti_richness(const LtiTrajectoryData &d,
                                       double rank_tol = kRankTol) {
  return data_matrix_richness(d.L, d.k0, rank_tol);
}

/// Initial states (standard Gaussian) and per-experiment excitation sequences
/// for an l-experiment campaign. Experiment j uses excitation seed
/// spec.seed + j + 1; initial states come from a generator seeded with
/// spec.seed.
struct ExperimentPlan {
  std::vector<Vector> init_states;
  std::vector<std::vector<Vector>> inputs;
};

inline ExperimentPlan plan_experiments(Eigen::Index n, Eigen::Index m, std::size_t l,
                                       std::size_t N, const ExcitationSpec &spec,
                                       double init_scale = 1.0) {
  spec.validate();
  ExperimentPlan plan;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t j = 0; j < l; ++j) {
    Vector x0(n);
    for (Eigen::Index i = 0; i < n; ++i)
      x0(i) = init_scale * nd(rng);
    plan.init_states.push_back(std::move(x0));
    ExcitationSpec ej = spec;
    ej.seed = spec.seed + j + 1;
    plan.inputs.push_back(generate_excitation(ej, m, N));
  }
  return plan;
}

} // namespace ltvlq
