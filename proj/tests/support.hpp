#pragma once

// Random instances shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>

#include <ltvlq/ensemble.hpp>
#include <ltvlq/model.hpp>

namespace ltvlq::testing {

struct Instance {
  TimeVaryingSystem sys;
  CostSpec cost;
};

inline Matrix gaussian(std::mt19937_64 &rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i)
    M.data()[i] = scale * nd(rng);
  return M;
}

inline Matrix random_pd(std::mt19937_64 &rng, Eigen::Index n, double floor = 0.5) {
  const Matrix M = gaussian(rng, n, n);
  return M * M.transpose() + floor * Matrix::Identity(n, n);
}

/// A ~ N(0, 1/n), B ~ N(0, 1), Q = I, R = I, Qf = I.
inline Instance random_instance(std::mt19937_64 &rng, Eigen::Index n, Eigen::Index m,
                                std::size_t N, bool time_varying, double gamma = 1.0) {
  Instance in;
  Matrix A = gaussian(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
  Matrix B = gaussian(rng, n, m);
  for (std::size_t k = 0; k < N; ++k) {
    if (time_varying && k > 0) {
      A = gaussian(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
      B = gaussian(rng, n, m);
    }
    in.sys.A.push_back(A);
    in.sys.B.push_back(B);
  }
  in.cost.Q.assign(N, Matrix::Identity(n, n));
  in.cost.R.assign(N, Matrix::Identity(m, m));
  in.cost.Qf = Matrix::Identity(n, n);
  in.cost.gamma = gamma;
  return in;
}

/// One open-loop run of `steps` steps from a Gaussian state with Gaussian input.
inline Trajectory lti_experiment(std::mt19937_64 &rng, const Matrix &A, const Matrix &B,
                                 std::size_t steps) {
  TimeVaryingSystem lti;
  lti.A.assign(steps, A);
  lti.B.assign(steps, B);
  const Vector x0 = gaussian(rng, A.rows(), 1);
  ExcitationSpec es;
  es.seed = rng();
  return simulate_open_loop(lti, x0, generate_excitation(es, B.cols(), steps));
}

inline double scalar(const Matrix &m) { return m(0, 0); }

inline TimeVaryingSystem scalar_system(double a, double b, std::size_t N) {
  TimeVaryingSystem s;
  s.A.assign(N, Matrix::Constant(1, 1, a));
  s.B.assign(N, Matrix::Constant(1, 1, b));
  return s;
}

inline CostSpec scalar_cost(double q, double r, double qf, double gamma, std::size_t N) {
  CostSpec c;
  c.Q.assign(N, Matrix::Constant(1, 1, q));
  c.R.assign(N, Matrix::Constant(1, 1, r));
  c.Qf = Matrix::Constant(1, 1, qf);
  c.gamma = gamma;
  return c;
}

} // namespace ltvlq::testing
