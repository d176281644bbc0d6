#include <gtest/gtest.h>

#include <ltvlq/experiments.hpp>

#include "support.hpp"

using namespace ltvlq;
using namespace ltvlq::testing;
using ltvlq::io::json;

TEST(Example1, PathsReachOptimalCost) {
  pipeline::Example1Options o;
  const auto r = pipeline::run_example1(o);
  EXPECT_NEAR(r.riccati.cost, 19.4674, 1e-2);
  ASSERT_TRUE(r.model_based && r.data);
  EXPECT_NEAR(r.model_based->cost, r.riccati.cost, 1e-4 * r.riccati.cost);
  EXPECT_NEAR(r.data->cost, r.riccati.cost, 1e-4 * r.riccati.cost);
  EXPECT_TRUE(r.model_based->kkt->pass);
  EXPECT_TRUE(r.data->kkt->pass);
  EXPECT_LE(std::abs(r.model_based->duality_gap), 1e-4 * (1.0 + r.model_based->primal_objective));
}

TEST(Example1, UndiscountedCost) {
  pipeline::Example1Options o;
  o.gamma = 1.0;
  o.model_based = false;
  const auto r = pipeline::run_example1(o);
  ASSERT_TRUE(r.data);
  EXPECT_NEAR(r.data->cost, 20.1157, 1e-2);
  EXPECT_FALSE(r.model_based.has_value());
}

TEST(Example1, RejectsBadDiscount) {
  pipeline::Example1Options o;
  o.gamma = 1.2;
  EXPECT_THROW(pipeline::run_example1(o), InputError);
}

TEST(Example2, ClosedLoopContracts) {
  pipeline::Example2Options o;
  const auto r = pipeline::run_example2(o);
  EXPECT_LT(r.ratio, 0.5);
  EXPECT_GE(r.attempts, 1);
  EXPECT_FALSE(r.kkt.items.empty());
  EXPECT_GT(r.open_loop_peak, 0.0);
}

TEST(MonteCarlo, SingleRunRows) {
  pipeline::MonteCarloOptions o;
  o.runs = 1;
  o.sigmas = {0.0, 1e-3};
  o.threads = 2;
  const auto s = pipeline::run_monte_carlo(o);
  ASSERT_EQ(s.rows.size(), 2u);
  ASSERT_EQ(s.runs.size(), 2u);
  EXPECT_EQ(s.rows[0].failures, 0u);
  EXPECT_EQ(s.rows[0].std_cost, 0.0);
  EXPECT_NEAR(s.rows[0].mean_cost, 20.1157, 1e-2);
  EXPECT_EQ(s.runs[0].seed, s.runs[1].seed);
}

TEST(MonteCarlo, FailuresAreCounted) {
  pipeline::MonteCarloOptions o;
  o.runs = 2;
  o.sigmas = {0.0};
  o.l = 5;
  o.solver.max_iterations = 1; // cannot converge
  const auto s = pipeline::run_monte_carlo(o);
  EXPECT_EQ(s.rows[0].failures, 2u);
  for (const auto &r : s.runs) {
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.failure.empty());
  }
}

TEST(MonteCarlo, RejectsBadOptions) {
  pipeline::MonteCarloOptions o;
  o.runs = 0;
  EXPECT_THROW(pipeline::run_monte_carlo(o), InputError);
  o.runs = 1;
  o.l = 4;
  EXPECT_THROW(pipeline::run_monte_carlo(o), InputError);
}

namespace {

json example1_bundle(const DualSolution &sol) {
  return json{{"problem", "example1"}, {"gamma", 0.98}, {"solution", io::solution_to_json(sol)}};
}

} // namespace

TEST(Certify, ModelBasedBundle) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  const auto s = pipeline::synthesize(assemble_model_based(sys, cost), 4, 1, 35);
  const auto r = pipeline::run_certify(example1_bundle(s.solution));
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.model_available);
  EXPECT_TRUE(r.gap_pass);
  const json j = pipeline::certify_result_to_json(r);
  EXPECT_TRUE(j.at("pass").get<bool>());
}

TEST(Certify, OracleBundleAndZeroedW) {
  const auto sys = plants::example1_system();
  const auto cost = plants::example1_cost(0.98);
  auto sol = oracle_solution(sys, cost, Matrix::Identity(4, 4));
  EXPECT_TRUE(pipeline::run_certify(example1_bundle(sol)).pass);
  sol.W.setZero();
  const auto r = pipeline::run_certify(example1_bundle(sol));
  EXPECT_FALSE(r.pass);
  const auto f = r.kkt.failures();
  EXPECT_NE(std::find(f.begin(), f.end(), "eq43"), f.end());
}

TEST(Certify, NonlinearNeedsEnsemble) {
  const json b{{"problem", "example2"},
               {"solution", io::solution_to_json(oracle_solution(
                                scalar_system(1, 1, 1), scalar_cost(1, 1, 1, 1.0, 1),
                                Matrix::Ones(1, 1)))}};
  EXPECT_THROW(pipeline::run_certify(b), InputError);
}

TEST(Io, MatrixAndSolutionRoundTrip) {
  std::mt19937_64 rng(51);
  const Matrix a = gaussian(rng, 3, 4);
  EXPECT_EQ(io::matrix_from_json(io::to_json(a), "a"), a);
  const auto sol = oracle_solution(plants::example1_system(), plants::example1_cost(0.98),
                                   Matrix::Identity(4, 4));
  const auto back = io::solution_from_json(io::solution_to_json(sol));
  EXPECT_EQ(back.W, sol.W);
  for (std::size_t k = 0; k < sol.G.size(); ++k)
    EXPECT_EQ(back.G[k], sol.G[k]);
  EXPECT_THROW(io::matrix_from_json(json::parse("[[1,2],[3]]"), "ragged"), InputError);
}

TEST(Io, ProgramRoundTrip) {
  std::mt19937_64 rng(52);
  const auto in = random_instance(rng, 2, 1, 3, true);
  const auto p = assemble_model_based(in.sys, in.cost);
  const auto q = io::program_from_json(json::parse(io::program_to_json(p).dump()));
  ASSERT_EQ(q.blocks.size(), p.blocks.size());
  EXPECT_EQ(q.objective, p.objective);
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    EXPECT_EQ(q.blocks[b].label, p.blocks[b].label);
    EXPECT_EQ(q.blocks[b].constant, p.blocks[b].constant);
    EXPECT_EQ(q.blocks[b].terms.size(), p.blocks[b].terms.size());
  }
}

TEST(Io, EnsembleRoundTrip) {
  pipeline::EnsembleOptions eo;
  eo.sigma = 1e-3;
  const auto ens = pipeline::make_ensemble(plants::example1_system(), 4, 1, 35, 0.98, eo);
  const auto back = io::ensemble_from_json(json::parse(io::ensemble_to_json(ens).dump()));
  EXPECT_EQ(back.l, ens.l);
  EXPECT_EQ(back.gamma, ens.gamma);
  for (std::size_t k = 0; k < ens.D.size(); ++k)
    EXPECT_EQ(back.D[k], ens.D[k]);
}

TEST(Io, InlineProblem) {
  const auto sys = scalar_system(1, 1, 2);
  const auto cost = scalar_cost(1, 1, 1, 1.0, 2);
  const auto p = io::resolve_problem(io::system_cost_to_json(sys, cost), 1.0);
  ASSERT_TRUE(p.is_linear());
  EXPECT_EQ(p.horizon(), 2u);
  EXPECT_THROW(io::resolve_problem(json(3), 1.0), InputError);
  EXPECT_THROW(io::resolve_problem("no-such-plant.json", 1.0), InputError);
}
