#include <gtest/gtest.h>

#include <ltvlq/ensemble.hpp>
#include <ltvlq/plants.hpp>

#include "support.hpp"

using namespace ltvlq;
using namespace ltvlq::testing;

TEST(Excitation, RejectsZeroAmplitude) {
  ExcitationSpec s;
  s.amplitude = 0.0;
  EXPECT_THROW(generate_excitation(s, 1, 10), InputError);
}

TEST(Excitation, Deterministic) {
  for (auto kind : {ExcitationKind::gaussian_white, ExcitationKind::sum_of_sinusoids,
                    ExcitationKind::piecewise_constant}) {
    ExcitationSpec s;
    s.kind = kind;
    s.seed = 42;
    const auto a = generate_excitation(s, 2, 50);
    const auto b = generate_excitation(s, 2, 50);
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_EQ(a[k], b[k]);
  }
}

TEST(Excitation, GaussianVariance) {
  ExcitationSpec s;
  s.seed = 7;
  const auto u = generate_excitation(s, 1, 1000);
  double mean = 0.0, var = 0.0;
  for (const auto &v : u)
    mean += v(0);
  mean /= 1000.0;
  for (const auto &v : u)
    var += (v(0) - mean) * (v(0) - mean);
  var /= 999.0;
  EXPECT_GE(var, 0.85);
  EXPECT_LE(var, 1.15);
}

TEST(Excitation, BoundedKinds) {
  ExcitationSpec s;
  s.amplitude = 0.3;
  s.kind = ExcitationKind::piecewise_constant;
  s.dwell = 4;
  const auto p = generate_excitation(s, 1, 40);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_LE(std::abs(p[k](0)), 0.3);
    if (k % 4)
      EXPECT_EQ(p[k](0), p[k - 1](0));
  }
  s.kind = ExcitationKind::sum_of_sinusoids;
  for (const auto &v : generate_excitation(s, 2, 40))
    EXPECT_LE(v.cwiseAbs().maxCoeff(), 0.3 + 1e-12);
}

TEST(Ensemble, RawColumnsWithoutDiscount) {
  std::mt19937_64 rng(1);
  const auto in = random_instance(rng, 2, 1, 4, true);
  const auto plan = plan_experiments(2, 1, 3, 4, ExcitationSpec{});
  const auto ens = collect_ensemble(in.sys, plan.init_states, plan.inputs, 1.0, 0.0, 5);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto tr = simulate_open_loop(in.sys, plan.init_states[j], plan.inputs[j]);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(Vector(ens.D[k].col(j)),
                (Vector(3) << tr.states[k], tr.inputs[k]).finished());
    }
    EXPECT_EQ(Vector(ens.X[4].col(j)), tr.states[4]);
  }
}

TEST(Ensemble, DiscountScaling) {
  std::mt19937_64 rng(2);
  const auto in = random_instance(rng, 2, 1, 4, true);
  const auto plan = plan_experiments(2, 1, 3, 4, ExcitationSpec{});
  const auto raw = collect_ensemble(in.sys, plan.init_states, plan.inputs, 1.0, 0.0, 5);
  const auto disc = collect_ensemble(in.sys, plan.init_states, plan.inputs, 0.25, 0.0, 5);
  EXPECT_LT((disc.X[2] - 0.25 * raw.X[2]).norm(), 1e-15);
  EXPECT_LT((disc.U[2] - 0.25 * raw.U[2]).norm(), 1e-15);
}

TEST(Ensemble, NoiseUsesCommonRandomNumbers) {
  std::mt19937_64 rng(3);
  const auto in = random_instance(rng, 2, 1, 4, true);
  const auto plan = plan_experiments(2, 1, 3, 4, ExcitationSpec{});
  const auto a = collect_ensemble(in.sys, plan.init_states, plan.inputs, 1.0, 1e-3, 9);
  const auto b = collect_ensemble(in.sys, plan.init_states, plan.inputs, 1.0, 2e-3, 9);
  const auto clean = collect_ensemble(in.sys, plan.init_states, plan.inputs, 1.0, 0.0, 9);
  // Same draws, doubled amplitude; inputs are noise free.
  EXPECT_LT((b.X[3] - clean.X[3] - 2.0 * (a.X[3] - clean.X[3])).norm(), 1e-14);
  EXPECT_EQ(a.U[1], clean.U[1]);
  EXPECT_GT((a.X[3] - clean.X[3]).norm(), 0.0);
}

TEST(Richness, Example1MinimalEnsemblePasses) {
  const auto plan = plan_experiments(4, 1, 5, 35, ExcitationSpec{});
  const auto ens =
      collect_ensemble(plants::example1_system(), plan.init_states, plan.inputs, 0.98, 0.0, 1);
  const auto rep = check_richness(ens);
  EXPECT_TRUE(rep.pass);
  EXPECT_FALSE(rep.first_failure().has_value());
}

TEST(Richness, TooFewExperimentsFailEverywhere) {
  const auto plan = plan_experiments(4, 1, 4, 35, ExcitationSpec{});
  const auto ens =
      collect_ensemble(plants::example1_system(), plan.init_states, plan.inputs, 0.98, 0.0, 1);
  const auto rep = check_richness(ens);
  EXPECT_FALSE(rep.pass);
  for (const auto &s : rep.steps)
    EXPECT_FALSE(s.pass);
  EXPECT_EQ(rep.first_failure().value(), 0u);
}

TEST(Richness, DuplicatedExperimentFails) {
  auto plan = plan_experiments(4, 1, 5, 35, ExcitationSpec{});
  plan.init_states[4] = plan.init_states[1];
  plan.inputs[4] = plan.inputs[1];
  const auto ens =
      collect_ensemble(plants::example1_system(), plan.init_states, plan.inputs, 1.0, 0.0, 1);
  EXPECT_FALSE(check_richness(ens).pass);
}

TEST(LtiData, ZeroInputCannotExcite) {
  Trajectory tr;
  tr.states = {Vector::Constant(1, 1), Vector::Constant(1, 2), Vector::Constant(1, 4)};
  tr.inputs = {Vector::Zero(1), Vector::Zero(1)};
  const auto d = build_lti_trajectory_data(tr, 1, 1, 0);
  EXPECT_EQ(d.L, (Matrix(2, 2) << 1, 2, 0, 0).finished());
  EXPECT_EQ(d.X_L, (Matrix(1, 2) << 2, 4).finished());
  EXPECT_FALSE(check_lti_richness(d).pass);
}

TEST(LtiData, ExcitedTrajectory) {
  const auto sys = scalar_system(2.0, 1.0, 2);
  const auto tr = simulate_open_loop(sys, Vector::Ones(1),
                                     {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)});
  EXPECT_EQ(tr.states[1](0), 3.0);
  EXPECT_EQ(tr.states[2](0), 5.0);
  const auto d = build_lti_trajectory_data(tr, 1, 1, 0);
  EXPECT_EQ(d.L, (Matrix(2, 2) << 1, 3, 1, -1).finished());
  EXPECT_EQ(d.X_L, (Matrix(1, 2) << 3, 5).finished());
  EXPECT_TRUE(check_lti_richness(d).pass);
}

TEST(LtiData, ColumnIdentityAndOffset) {
  std::mt19937_64 rng(8);
  const auto in = random_instance(rng, 3, 2, 1, false);
  const auto tr = lti_experiment(rng, in.sys.A[0], in.sys.B[0], 9);
  const auto d = build_lti_trajectory_data(tr, 3, 2, 2);
  ASSERT_EQ(d.X_L.cols(), 5);
  for (Eigen::Index j = 0; j < 5; ++j)
    EXPECT_EQ(Vector(d.X_L.col(j)), tr.states[2 + j + 1]);
  EXPECT_THROW(build_lti_trajectory_data(tr, 3, 2, 5), InputError);
}
