#include <gtest/gtest.h>

#include <ltvlq/experiments.hpp>

#include "support.hpp"

using namespace ltvlq;
using namespace ltvlq::testing;

namespace {

double solution_scale(const DualSolution &sol) {
  double s = sol.W.norm();
  for (const auto &g : sol.G)
    s = std::max(s, g.norm());
  return 1.0 + s;
}

} // namespace

TEST(Certificate, InitialGammaIsZ) {
  std::mt19937_64 rng(41);
  const auto in = random_instance(rng, 3, 2, 5, true, 0.9);
  const Matrix Z = random_pd(rng, 3);
  const auto cert = build_kkt_certificate(in.sys, in.cost, Z);
  EXPECT_LT((cert.Gamma[0] - Z).norm(), 1e-15);
  EXPECT_EQ(cert.M2, linalg::symmetrize(Z));
  for (const auto &M : cert.M3) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    long rank = 0;
    for (double v : es.eigenvalues())
      rank += v > 1e-12 * top;
    EXPECT_LE(rank, 3);
  }
  for (const auto &M : cert.M1)
    EXPECT_EQ(M.norm(), 0.0);
}

TEST(Certificate, ScalarM3) {
  // a = b = 1, all weights 1, N = 1: K = -1/2, M3 = [1; -1/2][1; -1/2]'.
  const auto cert =
      build_kkt_certificate(scalar_system(1, 1, 1), scalar_cost(1, 1, 1, 1.0, 1), Matrix::Ones(1, 1));
  const Matrix expect = (Matrix(2, 2) << 1, -0.5, -0.5, 0.25).finished();
  EXPECT_LT((cert.M3[0] - expect).norm(), 1e-15);
}

TEST(Kkt, OraclePassesOnRandomInstances) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::Index n = 1 + rng() % 4, m = 1 + rng() % 3;
    const auto in = random_instance(rng, n, m, 1 + rng() % 10, trial % 3 != 0, 0.96);
    const Matrix Z = random_pd(rng, n);
    const auto sol = oracle_solution(in.sys, in.cost, Z);
    const auto rep =
        check_kkt(in.sys, in.cost, Z, sol, build_kkt_certificate(in.sys, in.cost, Z), 1e-8);
    EXPECT_TRUE(rep.pass) << "trial " << trial << " max residual " << rep.max_residual
                          << " scale " << rep.scale;
  }
}

TEST(Kkt, InflatedWIsCaught) {
  std::mt19937_64 rng(43);
  const auto in = random_instance(rng, 3, 1, 4, true);
  const Matrix Z = random_pd(rng, 3);
  auto sol = oracle_solution(in.sys, in.cost, Z);
  sol.W += 0.01 * Matrix::Identity(3, 3);
  const auto rep = check_kkt(in.sys, in.cost, Z, sol, build_kkt_certificate(in.sys, in.cost, Z));
  EXPECT_FALSE(rep.pass);
  const auto *eq43 = rep.find("eq43");
  ASSERT_NE(eq43, nullptr);
  EXPECT_NEAR(eq43->residual, 0.01 * Z.trace(), 0.1 * 0.01 * Z.trace());
}

TEST(Kkt, ZeroSolutionFails) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  const Matrix Z = Matrix::Identity(4, 4);
  DualSolution sol;
  sol.W = Matrix::Zero(4, 4);
  sol.G.assign(35, Matrix::Zero(5, 5));
  // G22 = 0 is singular: either the report fails or the gains cannot be read.
  try {
    const auto rep = check_kkt(sys, cost, Z, sol, build_kkt_certificate(sys, cost, Z));
    EXPECT_FALSE(rep.pass);
    EXPECT_FALSE(rep.failures().empty());
  } catch (const CertificationError &) {
    SUCCEED();
  }
}

TEST(Primal, ZeroGainSlice) {
  std::mt19937_64 rng(44);
  const auto in = random_instance(rng, 2, 1, 3, true);
  const GainSchedule zero{std::vector<Matrix>(3, Matrix::Zero(1, 2))};
  const auto pr = reconstruct_primal(in.sys, in.cost, zero, Matrix::Identity(2, 2));
  Matrix expect = Matrix::Zero(3, 3);
  expect.topLeftCorner(2, 2).setIdentity();
  EXPECT_EQ(pr.S[0], expect);
}

// With Z = I the primal objective is the sum of closed-loop costs from the unit vectors.
TEST(PrimalProperty, SumOfUnitVectorCosts) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 1 + rng() % 3, m = 1 + rng() % 2;
    const std::size_t N = 1 + rng() % 6;
    const auto in = random_instance(rng, n, m, N, true, 0.9);
    GainSchedule g;
    for (std::size_t k = 0; k < N; ++k)
      g.K.push_back(gaussian(rng, m, n, 0.5));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      sum += evaluate_cost(in.cost,
                           simulate_closed_loop(in.sys, g, Vector::Unit(n, i)));
    const auto pr = reconstruct_primal(in.sys, in.cost, g, Matrix::Identity(n, n));
    EXPECT_NEAR(pr.objective, sum, 1e-10 * (1.0 + sum));
  }
}

TEST(Primal, OptimalGainsCloseTheGap) {
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(rng, 3, 2, 5, true, 0.95);
    const Matrix Z = random_pd(rng, 3);
    const auto vm = solve_dre(in.sys, in.cost);
    const auto g = optimal_gains(in.sys, in.cost, vm);
    const auto pr = reconstruct_primal(in.sys, in.cost, g, Z);
    EXPECT_NEAR(pr.objective, (Z * vm.P[0]).trace(), 1e-9 * (1.0 + pr.objective));
    const auto sol = oracle_solution(in.sys, in.cost, Z);
    EXPECT_NEAR(duality_gap(pr.objective, sol, Z), 0.0, 1e-9 * (1.0 + pr.objective));
    const GainSchedule zero{std::vector<Matrix>(5, Matrix::Zero(2, 3))};
    EXPECT_GT(duality_gap(reconstruct_primal(in.sys, in.cost, zero, Z).objective, sol, Z), 0.0);
  }
}

TEST(Gap, SolverSolutionMatchesRiccati) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  const auto s = pipeline::synthesize(assemble_model_based(sys, cost), 4, 1, 35);
  const auto pr = reconstruct_primal(sys, cost, s.gains, Matrix::Identity(4, 4));
  const double gap = duality_gap(pr.objective, s.solution, Matrix::Identity(4, 4));
  EXPECT_LE(std::abs(gap), 1e-4 * (1.0 + std::abs(pr.objective)));
  const double p0 = solve_dre(sys, cost).P[0].trace();
  EXPECT_NEAR(s.solution.W.trace(), p0, 1e-6 * p0);
}

TEST(Problem2, SolverSolutionIsFeasible) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  const auto s = pipeline::synthesize(assemble_model_based(sys, cost), 4, 1, 35);
  const auto rep = check_problem2_feasibility(s.solution, sys, cost);
  EXPECT_GE(rep.min_eigenvalue, -1e-6 * solution_scale(s.solution));
  EXPECT_TRUE(rep.pass);
}

TEST(Problem2, OracleIsTightAndPerturbationViolates) {
  std::mt19937_64 rng(47);
  const auto in = random_instance(rng, 2, 2, 6, true, 0.9);
  auto sol = oracle_solution(in.sys, in.cost, Matrix::Identity(2, 2));
  auto rep = check_problem2_feasibility(sol, in.sys, in.cost);
  for (const auto &c : rep.constraints)
    if (c.label == "prob2:b" || c.label == "prob2:c")
      EXPECT_LE(c.residual, 1e-9 * rep.scale) << c.label << "[" << c.index << "]";
  EXPECT_TRUE(rep.pass);

  sol.W += Matrix::Identity(2, 2);
  rep = check_problem2_feasibility(sol, in.sys, in.cost);
  EXPECT_FALSE(rep.pass);
  for (const auto &c : rep.constraints)
    if (c.label == "prob2:b")
      EXPECT_NEAR(c.min_eigenvalue, -1.0, 1e-9);
}

TEST(Problem2, SingularG22Throws) {
  auto sol = oracle_solution(scalar_system(1, 1, 2), scalar_cost(1, 1, 1, 1.0, 2),
                             Matrix::Ones(1, 1));
  sol.G[1](1, 1) = 0.0;
  EXPECT_THROW(check_problem2_feasibility(sol, scalar_system(1, 1, 2),
                                          scalar_cost(1, 1, 1, 1.0, 2)),
               CertificationError);
}

TEST(HResiduals, OracleIsTight) {
  std::mt19937_64 rng(48);
  const auto in = random_instance(rng, 3, 1, 5, true, 0.97);
  const auto sol = oracle_solution(in.sys, in.cost, Matrix::Identity(3, 3));
  const auto g = optimal_gains(in.sys, in.cost, solve_dre(in.sys, in.cost));
  for (double h : h_residuals(in.sys, in.cost, sol, g))
    EXPECT_GE(h, -1e-9 * solution_scale(sol));
}

TEST(KktData, Example1DataSolution) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  pipeline::EnsembleOptions eo;
  const auto ens = pipeline::make_ensemble(sys, 4, 1, 35, 0.98, eo);
  const auto s = pipeline::synthesize(assemble_model_free_ltv(ens, cost), 4, 1, 35);
  const auto rep = check_kkt_data(ens, cost, s.solution);
  EXPECT_TRUE(rep.pass) << rep.max_residual;
  const auto *eq43 = rep.find("eq43");
  ASSERT_NE(eq43, nullptr);
  EXPECT_TRUE(eq43->skipped);

  auto bad = s.solution;
  bad.W *= 2.0;
  EXPECT_FALSE(check_kkt_data(ens, cost, bad).pass);
}
