#include <gtest/gtest.h>

#include <ltvlq/model.hpp>
#include <ltvlq/plants.hpp>
#include <ltvlq/riccati.hpp>

#include "support.hpp"

using namespace ltvlq;
using namespace ltvlq::testing;

TEST(Model, OpenLoopDoubling) {
  const auto sys = scalar_system(2.0, 1.0, 3);
  const auto tr = simulate_open_loop(sys, Vector::Ones(1), std::vector<Vector>(3, Vector::Zero(1)));
  ASSERT_EQ(tr.states.size(), 4u);
  const double expect[] = {1, 2, 4, 8};
  for (int k = 0; k < 4; ++k)
    EXPECT_EQ(tr.states[k](0), expect[k]);
}

TEST(Model, ZeroIsFixedPoint) {
  std::mt19937_64 rng(3);
  const auto in = random_instance(rng, 3, 2, 6, true);
  const auto tr =
      simulate_open_loop(in.sys, Vector::Zero(3), std::vector<Vector>(6, Vector::Zero(2)));
  for (const auto &x : tr.states)
    EXPECT_EQ(x.norm(), 0.0);
}

TEST(Model, Example1FirstStep) {
  const auto sys = plants::example1_system();
  const Vector x0 = plants::example1_x0();
  const auto tr = simulate_open_loop(sys, x0, std::vector<Vector>(35, Vector::Zero(1)));
  // A(0) by hand: cos(0)=1, sin(0)=0, k=0.
  Matrix A0(4, 4);
  A0 << 1, 0, -0.1, 0, -0.1, 0, 0, 0.2, 0, -0.2, 1, 0, 0, 0, 0.1, 1;
  EXPECT_LT((tr.states[1] - A0 * x0).norm(), 1e-15);
}

TEST(Model, ZeroGainMatchesOpenLoop) {
  std::mt19937_64 rng(5);
  const auto in = random_instance(rng, 2, 1, 5, true);
  GainSchedule g{std::vector<Matrix>(5, Matrix::Zero(1, 2))};
  const Vector x0 = gaussian(rng, 2, 1);
  const auto cl = simulate_closed_loop(in.sys, g, x0);
  const auto ol = simulate_open_loop(in.sys, x0, std::vector<Vector>(5, Vector::Zero(1)));
  for (std::size_t k = 0; k < cl.states.size(); ++k)
    EXPECT_EQ(cl.states[k], ol.states[k]);
}

TEST(Model, Deadbeat) {
  const auto sys = scalar_system(1.0, 1.0, 4);
  GainSchedule g{std::vector<Matrix>(4, Matrix::Constant(1, 1, -1.0))};
  const auto tr = simulate_closed_loop(sys, g, Vector::Constant(1, 5.0));
  EXPECT_EQ(tr.states[0](0), 5.0);
  for (std::size_t k = 1; k < tr.states.size(); ++k)
    EXPECT_EQ(tr.states[k](0), 0.0);
}

TEST(Model, NonlinearLinearReduction) {
  std::mt19937_64 rng(9);
  const auto in = random_instance(rng, 3, 2, 7, true);
  GainSchedule g;
  for (int k = 0; k < 7; ++k)
    g.K.push_back(gaussian(rng, 2, 3, 0.3));
  const Vector x0 = gaussian(rng, 3, 1);
  const auto a = simulate_closed_loop(in.sys, g, x0);
  const auto b = simulate_nonlinear_closed_loop(as_stepper(in.sys), g, x0);
  for (std::size_t k = 0; k < a.states.size(); ++k)
    EXPECT_LT((a.states[k] - b.states[k]).norm(), 1e-14);
}

TEST(Model, Example2OriginIsEquilibrium) {
  GainSchedule g{std::vector<Matrix>(25, Matrix::Zero(1, 3))};
  const auto tr = simulate_nonlinear_closed_loop(plants::example2_plant(), g, Vector::Zero(3));
  for (const auto &x : tr.states)
    EXPECT_EQ(x.norm(), 0.0);
}

TEST(Model, CostTrivialCases) {
  const auto sys = scalar_system(1.0, 1.0, 1);
  const auto tr = simulate_open_loop(sys, Vector::Ones(1), {Vector::Zero(1)});
  EXPECT_DOUBLE_EQ(evaluate_cost(scalar_cost(1, 1, 1, 1.0, 1), tr), 2.0);
  EXPECT_DOUBLE_EQ(evaluate_cost(scalar_cost(0, 1, 0, 1.0, 1), tr), 0.0);
}

TEST(Model, Example1OptimalCost) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  const auto g = optimal_gains(sys, cost, solve_dre(sys, cost));
  const double J = evaluate_cost(cost, simulate_closed_loop(sys, g, plants::example1_x0()));
  EXPECT_NEAR(J, 19.4674, 1e-2);
}

TEST(Model, StageMatrices) {
  TimeVaryingSystem sys;
  sys.A = {Matrix::Identity(2, 2)};
  sys.B = {Matrix::Zero(2, 1)};
  CostSpec c;
  c.Q = {2.0 * Matrix::Identity(2, 2)};
  c.R = {Matrix::Constant(1, 1, 3.0)};
  c.Qf = Matrix::Identity(2, 2);
  c.gamma = 1.0;
  auto st = stage_matrices(sys, c, 0);
  Matrix E(2, 3);
  E << 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(st.E, E);
  EXPECT_EQ(st.Lambda, Vector((Vector(3) << 2, 2, 3).finished()).asDiagonal().toDenseMatrix());

  std::mt19937_64 rng(1);
  const auto in = random_instance(rng, 3, 2, 2, true, 0.25);
  st = stage_matrices(in.sys, in.cost, 1);
  Matrix AB(3, 5);
  AB << in.sys.A[1], in.sys.B[1];
  EXPECT_EQ(st.E, Matrix(0.5 * AB));
  EXPECT_THROW(stage_matrices(in.sys, in.cost, 2), InputError);
}

TEST(Model, CostValidation) {
  auto c = scalar_cost(1, 1, 1, 1.0, 2);
  c.gamma = 0.0;
  EXPECT_THROW(c.normalize(), InputError);
  c.gamma = 1.5;
  EXPECT_THROW(c.normalize(), InputError);
  c = scalar_cost(1, 0, 1, 1.0, 2);
  EXPECT_THROW(c.normalize(), InputError);
  CostSpec asym;
  asym.Q = {(Matrix(2, 2) << 1, 1, 0, 1).finished()};
  asym.R = {Matrix::Identity(1, 1)};
  asym.Qf = Matrix::Identity(2, 2);
  EXPECT_THROW(asym.normalize(), InputError);
  TimeVaryingSystem bad;
  bad.A = {Matrix::Identity(2, 2)};
  bad.B = {Matrix::Zero(3, 1)};
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Model, GainScheduleShapes) {
  GainSchedule g{std::vector<Matrix>(3, Matrix::Zero(1, 2))};
  EXPECT_NO_THROW(g.validate(2, 1, 3));
  EXPECT_THROW(g.validate(2, 1, 4), InputError);
  EXPECT_THROW(g.validate(3, 1, 3), InputError);
}

// Superposition: zero-input response plus zero-state response.
TEST(ModelProperty, Superposition) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 3, 2, 8, true);
    const Vector x0 = gaussian(rng, 3, 1);
    std::vector<Vector> u(8);
    for (auto &v : u)
      v = gaussian(rng, 2, 1);
    const auto full = simulate_open_loop(in.sys, x0, u);
    const auto free = simulate_open_loop(in.sys, x0, std::vector<Vector>(8, Vector::Zero(2)));
    const auto forced = simulate_open_loop(in.sys, Vector::Zero(3), u);
    for (std::size_t k = 0; k <= 8; ++k)
      EXPECT_LT((full.states[k] - free.states[k] - forced.states[k]).norm(),
                1e-10 * (1.0 + full.states[k].norm()));
  }
}

// Closed-loop cost equals x0' S x0 from the Lyapunov recursion of the gains.
TEST(ModelProperty, LyapunovCostIdentity) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 3, 2, 6, true, 0.9);
    GainSchedule g;
    for (int k = 0; k < 6; ++k)
      g.K.push_back(gaussian(rng, 2, 3, 0.5));
    Matrix S = in.cost.Qf;
    for (int k = 5; k >= 0; --k) {
      const Matrix Acl = in.sys.A[k] + in.sys.B[k] * g.K[k];
      S = in.cost.Q[k] + g.K[k].transpose() * in.cost.R[k] * g.K[k] +
          in.cost.gamma * Acl.transpose() * S * Acl;
    }
    const Vector x0 = gaussian(rng, 3, 1);
    const double J = evaluate_cost(in.cost, simulate_closed_loop(in.sys, g, x0));
    EXPECT_NEAR(J, x0.dot(S * x0), 1e-9 * (1.0 + std::abs(J)));
  }
}
