#pragma once

#include <cmath>
#include <cstddef>

#include "model.hpp"

namespace ltvlq::plants {

// Unstable 4-state, 1-input LTV benchmark.
inline Matrix example1_A(std::size_t step) {
  const double k = static_cast<double>(step);
  const double sk = std::sqrt(k);
  Matrix A(4, 4);
  A << 1.0 - 0.05 * k, -0.5 * std::cos(0.2 * k) * sk, -0.1, 0.02 * k,
      -0.1 * std::cos(0.3 * k), 0.0, 0.03 * sk, 0.2,
      0.1 * std::sin(0.5 * k), -0.2, 1.0 - 0.01 * k, 0.002 * k,
      0.0, 0.01 * k, 0.1 * std::cos(0.2 * k), 1.0 + 0.03 * std::sin(0.1 * k);
  return A;
}

inline Matrix example1_B(std::size_t step) {
  const double k = static_cast<double>(step);
  Matrix B(4, 1);
  B << k, 1.0 - std::cos(0.1 * k), k, 1.0;
  return 0.1 * B;
}

inline constexpr std::size_t kExample1Horizon = 35;

inline TimeVaryingSystem example1_system(std::size_t N = kExample1Horizon) {
  TimeVaryingSystem sys;
  for (std::size_t k = 0; k < N; ++k) {
    sys.A.push_back(example1_A(k));
    sys.B.push_back(example1_B(k));
  }
  return sys;
}

/// Q = I4, R = 0.01, Qf = 10 I4.
inline CostSpec example1_cost(double gamma, std::size_t N = kExample1Horizon) {
  CostSpec c;
  c.Q.assign(N, Matrix::Identity(4, 4));
  c.R.assign(N, Matrix::Constant(1, 1, 0.01));
  c.Qf = 10.0 * Matrix::Identity(4, 4);
  c.gamma = gamma;
  return c;
}

inline Vector example1_x0() { return (Vector(4) << 1.0, 0.0, 2.0, -1.0).finished(); }

// Nonlinear 3-state, 1-input plant; the origin is an equilibrium.
inline Vector example2_step(std::size_t step, const Vector &x, const Vector &u) {
  const double k = static_cast<double>(step);
  const double x1 = x(0), x2 = x(1), x3 = x(2), v = u(0);
  Vector next(3);
  next(0) = -(1.0 + 0.04 * std::cos(0.1 * k)) * x1 + 0.5 * std::sin(0.2 * k) * v;
  next(1) = -0.1 * std::sin(0.5 * k) * x1 * x2 - 0.05 * k * x3 / (x2 + 1.0) -
            0.05 * v;
  next(2) = 0.04 * std::pow(k, 1.5) * x1 - x2 + 0.1 * k * x2 * v;
  return next;
}

inline constexpr std::size_t kExample2Horizon = 25;

inline NonlinearStepper example2_plant() {
  return NonlinearStepper{3, 1, &example2_step};
}

/// Q(k) = (0.5k + 2) I3, R(k) = 2 - 0.01k, Qf = 50 I3, gamma = 0.98.
/// Identity blocks are 3x3 to match the plant's state dimension.
inline CostSpec example2_cost(std::size_t N = kExample2Horizon) {
  CostSpec c;
  for (std::size_t k = 0; k < N; ++k) {
    const double kk = static_cast<double>(k);
    c.Q.push_back((0.5 * kk + 2.0) * Matrix::Identity(3, 3));
    c.R.push_back(Matrix::Constant(1, 1, 2.0 - 0.01 * kk));
  }
  c.Qf = 50.0 * Matrix::Identity(3, 3);
  c.gamma = 0.98;
  return c;
}

inline Vector example2_x0() { return (Vector(3) << -0.5, 2.0, -0.5).finished(); }

} // namespace ltvlq::plants
