#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "certification.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "lmi_assembler.hpp"
#include "model.hpp"
#include "plants.hpp"
#include "riccati.hpp"
#include "sdp_solver.hpp"

namespace ltvlq::pipeline {

using io::json;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Solver output turned into a dual solution and a gain schedule.
struct Synthesis {
  SolverResult solver;
  DualSolution solution;
  GainSchedule gains;
  std::size_t num_vars = 0;
  std::size_t num_blocks = 0;
};

/// Throws SolverError unless the solver reports an optimum, and
/// CertificationError if some G22(k) is not positive definite.
inline Synthesis synthesize(const ConicProgram &prog, Eigen::Index n, Eigen::Index m,
                            std::size_t N, const SolverOptions &opts = {}) {
  Synthesis s;
  s.num_vars = prog.num_vars;
  s.num_blocks = prog.blocks.size();
  s.solver = solve(prog, opts);
  if (!s.solver.ok())
    throw SolverError(std::string("solver stopped with status ") + to_string(s.solver.status) +
                      (s.solver.message.empty() ? "" : ": " + s.solver.message));
  s.solution = extract_dual_solution(VariableLayout(n, m, N), s.solver.y);
  s.gains = gains_from_dual(s.solution);
  return s;
}

inline double max_gain_error(const GainSchedule &a, const GainSchedule &b) {
  if (a.K.size() != b.K.size())
    throw InputError("gain schedules have different lengths");
  double e = 0.0;
  for (std::size_t k = 0; k < a.K.size(); ++k)
    e = std::max(e, (a.K[k] - b.K[k]).norm());
  return e;
}

// ---- ensembles ------------------------------------------------------------

struct EnsembleOptions {
  std::size_t l = 5;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  ExcitationSpec excitation{};
  double init_scale = 1.0;
};

/// Noise draws use a stream derived from the campaign seed, independent of
/// the excitation streams.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

inline DataEnsemble make_ensemble(const Plant &plant, Eigen::Index n, Eigen::Index m,
                                  std::size_t N, double gamma, const EnsembleOptions &o) {
  ExcitationSpec spec = o.excitation;
  spec.seed = o.seed;
  const ExperimentPlan plan = plan_experiments(n, m, o.l, N, spec, o.init_scale);
  return collect_ensemble(plant, plan.init_states, plan.inputs, gamma, o.sigma,
                          noise_seed(o.seed));
}

// ---- Example 1 ------------------------------------------------------------

struct Example1Options {
  double gamma = 0.98;
  std::size_t l = 5;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  bool model_based = true;
  bool data = true;
  SolverOptions solver{};
};

struct PathResult {
  std::string path;
  GainSchedule gains;
  double cost = kNaN;           // J(x0) on the true plant
  double objective = kNaN;      // trace(W) (trace(P(0)) for the Riccati path)
  double max_gain_error = kNaN; // against the Riccati gains
  double primal_objective = kNaN;
  double duality_gap = kNaN;
  Trajectory closed_loop;
  std::optional<Synthesis> synthesis;
  std::optional<KktReport> kkt;
};

struct Example1Result {
  Example1Options options;
  Vector x0;
  PathResult riccati;
  std::optional<PathResult> model_based;
  std::optional<PathResult> data;
  std::optional<DataEnsemble> ensemble;
};

namespace detail {

inline PathResult evaluate_path(std::string name, const TimeVaryingSystem &sys,
                                const CostSpec &cost, const Vector &x0, GainSchedule gains,
                                const GainSchedule &reference) {
  PathResult p;
  p.path = std::move(name);
  p.gains = std::move(gains);
  p.closed_loop = simulate_closed_loop(sys, p.gains, x0);
  p.cost = evaluate_cost(cost, p.closed_loop);
  p.max_gain_error = max_gain_error(p.gains, reference);
  const Matrix Z = Matrix::Identity(sys.n(), sys.n());
  p.primal_objective = reconstruct_primal(sys, cost, p.gains, Z).objective;
  return p;
}

inline void attach_synthesis(PathResult &p, Synthesis s, const TimeVaryingSystem &sys,
                             const CostSpec &cost) {
  const Matrix Z = Matrix::Identity(sys.n(), sys.n());
  p.objective = s.solution.objective;
  p.duality_gap = duality_gap(p.primal_objective, s.solution, Z);
  p.kkt = check_kkt(sys, cost, Z, s.solution, build_kkt_certificate(sys, cost, Z));
  p.synthesis = std::move(s);
}

} // namespace detail

inline Example1Result run_example1(const Example1Options &o) {
  if (!(o.gamma > 0.0 && o.gamma <= 1.0))
    throw InputError("example1: gamma must lie in (0, 1]");
  const TimeVaryingSystem sys = plants::example1_system();
  const CostSpec cost = plants::example1_cost(o.gamma);
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  Example1Result r;
  r.options = o;
  r.x0 = plants::example1_x0();

  const ValueMatrices vm = solve_dre(sys, cost);
  const GainSchedule ref = optimal_gains(sys, cost, vm);
  r.riccati = detail::evaluate_path("riccati", sys, cost, r.x0, ref, ref);
  r.riccati.objective = vm.P[0].trace();

  if (o.model_based) {
    Synthesis s = synthesize(assemble_model_based(sys, cost), n, m, N, o.solver);
    PathResult p = detail::evaluate_path("model-based", sys, cost, r.x0, s.gains, ref);
    detail::attach_synthesis(p, std::move(s), sys, cost);
    r.model_based = std::move(p);
  }
  if (o.data) {
    if (o.l < static_cast<std::size_t>(n + m))
      throw InputError("example1: the data path needs l >= n+m = " + std::to_string(n + m));
    EnsembleOptions eo;
    eo.l = o.l;
    eo.sigma = o.sigma;
    eo.seed = o.seed;
    r.ensemble = make_ensemble(sys, n, m, N, o.gamma, eo);
    Synthesis s = synthesize(assemble_model_free_ltv(*r.ensemble, cost), n, m, N, o.solver);
    PathResult p = detail::evaluate_path("data-ltv", sys, cost, r.x0, s.gains, ref);
    detail::attach_synthesis(p, std::move(s), sys, cost);
    r.data = std::move(p);
  }
  return r;
}

// ---- Example 2 ------------------------------------------------------------

struct Example2Options {
  std::uint64_t seed = 1;
  std::size_t l = 4;
  double amplitude = 0.01;
  double init_scale = 0.01;
  int max_attempts = 5;
  double divergence_threshold = 1e3;
  SolverOptions solver{};
};

struct Example2Result {
  Example2Options options;
  int attempts = 0;
  double amplitude_used = kNaN;
  std::uint64_t seed_used = 0;
  DataEnsemble ensemble;
  Synthesis synthesis;
  KktReport kkt;
  Vector x0;
  Trajectory closed_loop;
  double ratio = kNaN; // |x(N)| / |x(0)| in closed loop
  Trajectory open_loop;          // zero input; truncated at a non-finite state
  double open_loop_peak = kNaN;  // max |x(k)| over the horizon
  long open_loop_exceeds = -1;   // first k with |x(k)| > threshold, or -1
  bool open_loop_diverged = false;
};

/// Collects data near the origin, solves the time-varying data program and
/// runs the synthesized gains on the nonlinear plant from x0. A divergent
/// experiment is repeated with a fresh seed and half the amplitude.
inline Example2Result run_example2(const Example2Options &o) {
  const NonlinearStepper plant = plants::example2_plant();
  const CostSpec cost = plants::example2_cost();
  const std::size_t N = cost.horizon();
  Example2Result r;
  r.options = o;
  double amp = o.amplitude, init = o.init_scale;
  for (int attempt = 1;; ++attempt) {
    r.attempts = attempt;
    EnsembleOptions eo;
    eo.l = o.l;
    eo.seed = o.seed + 7919ULL * static_cast<std::uint64_t>(attempt - 1);
    eo.excitation.amplitude = amp;
    eo.init_scale = init;
    try {
      r.ensemble = make_ensemble(plant, plant.n, plant.m, N, cost.gamma, eo);
      r.amplitude_used = amp;
      r.seed_used = eo.seed;
      break;
    } catch (const DivergenceError &) {
      if (attempt >= o.max_attempts)
        throw;
      amp *= 0.5;
      init *= 0.5;
    }
  }
  r.synthesis = synthesize(assemble_model_free_ltv(r.ensemble, cost), plant.n, plant.m, N,
                           o.solver);
  r.kkt = check_kkt_data(r.ensemble, cost, r.synthesis.solution);
  r.x0 = plants::example2_x0();
  r.closed_loop = simulate_nonlinear_closed_loop(plant, r.synthesis.gains, r.x0);
  r.ratio = r.closed_loop.states.back().norm() / r.x0.norm();

  // Open loop with zero input, stepped manually so a blow-up is recorded
  // rather than thrown.
  r.open_loop.origin = TrajectoryOrigin::nonlinear;
  r.open_loop.states.push_back(r.x0);
  r.open_loop_peak = r.x0.norm();
  const Vector u0 = Vector::Zero(plant.m);
  for (std::size_t k = 0; k < N; ++k) {
    Vector next = plant.step(k, r.open_loop.states.back(), u0);
    r.open_loop.inputs.push_back(u0);
    if (!next.allFinite()) {
      r.open_loop_diverged = true;
      if (r.open_loop_exceeds < 0)
        r.open_loop_exceeds = static_cast<long>(k + 1);
      break;
    }
    const double nrm = next.norm();
    r.open_loop_peak = std::max(r.open_loop_peak, nrm);
    if (nrm > o.divergence_threshold && r.open_loop_exceeds < 0) {
      r.open_loop_exceeds = static_cast<long>(k + 1);
      r.open_loop_diverged = true;
    }
    r.open_loop.states.push_back(std::move(next));
  }
  return r;
}

// ---- Monte Carlo ------------------------------------------------------------

struct MonteCarloOptions {
  std::vector<double> sigmas{0.0, 5e-4, 1e-3, 5e-3};
  std::size_t runs = 100;
  std::size_t l = 5;
  std::uint64_t seed = 1;
  double gamma = 1.0;
  unsigned threads = 0; // 0: hardware concurrency
  SolverOptions solver{};
};

struct MonteCarloRun {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  double cost = kNaN;
  double wall_time = 0.0;
  std::string failure;
};

struct MonteCarloRow {
  double sigma = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double mean_cost = kNaN;
  double std_cost = kNaN;
  double mean_wall_time = kNaN;
};

struct MonteCarloSummary {
  MonteCarloOptions options;
  std::vector<MonteCarloRow> rows;
  std::vector<MonteCarloRun> runs; // sorted by (sigma index, seed)
};

/// Example 1 data pipeline repeated over seeds base+r for every sigma, so the
/// sigma rows share experiments and noise directions. Failures are counted,
/// never fatal.
inline MonteCarloSummary run_monte_carlo(const MonteCarloOptions &o) {
  if (o.runs < 1)
    throw InputError("monte carlo: runs must be >= 1");
  if (o.sigmas.empty())
    throw InputError("monte carlo: need at least one sigma");
  for (double s : o.sigmas)
    if (!(s >= 0.0))
      throw InputError("monte carlo: sigma must be nonnegative");
  const TimeVaryingSystem sys = plants::example1_system();
  const CostSpec cost = plants::example1_cost(o.gamma);
  const Vector x0 = plants::example1_x0();
  const auto n = sys.n(), m = sys.m();
  const std::size_t N = sys.horizon();
  if (o.l < static_cast<std::size_t>(n + m))
    throw InputError("monte carlo: l must be >= n+m");

  MonteCarloSummary out;
  out.options = o;
  const std::size_t total = o.sigmas.size() * o.runs;
  out.runs.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < total;) {
      MonteCarloRun &run = out.runs[t];
      run.sigma = o.sigmas[t / o.runs];
      run.seed = o.seed + t % o.runs;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        EnsembleOptions eo;
        eo.l = o.l;
        eo.sigma = run.sigma;
        eo.seed = run.seed;
        const DataEnsemble ens = make_ensemble(sys, n, m, N, o.gamma, eo);
        const Synthesis s = synthesize(assemble_model_free_ltv(ens, cost), n, m, N, o.solver);
        run.cost = evaluate_cost(cost, simulate_closed_loop(sys, s.gains, x0));
        run.ok = std::isfinite(run.cost);
        if (!run.ok)
          run.failure = "closed-loop cost is not finite";
      } catch (const Error &e) {
        run.failure = e.what();
      }
      run.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  unsigned threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i)
      pool.emplace_back(worker);
    for (auto &th : pool)
      th.join();
  }

  for (std::size_t si = 0; si < o.sigmas.size(); ++si) {
    MonteCarloRow row;
    row.sigma = o.sigmas[si];
    row.runs = o.runs;
    std::vector<double> costs;
    double time = 0.0;
    for (std::size_t r = 0; r < o.runs; ++r) {
      const auto &run = out.runs[si * o.runs + r];
      time += run.wall_time;
      if (run.ok)
        costs.push_back(run.cost);
      else
        ++row.failures;
    }
    row.mean_wall_time = time / static_cast<double>(o.runs);
    if (!costs.empty()) {
      double mean = 0.0;
      for (double c : costs)
        mean += c;
      mean /= static_cast<double>(costs.size());
      double var = 0.0;
      for (double c : costs)
        var += (c - mean) * (c - mean);
      row.mean_cost = mean;
      row.std_cost =
          costs.size() > 1 ? std::sqrt(var / static_cast<double>(costs.size() - 1)) : 0.0;
    }
    out.rows.push_back(row);
  }
  return out;
}

// ---- certification of a saved bundle ------------------------------------------

struct CertifyOptions {
  double tolerance = kKktTolerance;
  double gap_tolerance = 1e-4; // relative to 1 + |primal|
};

struct CertifyResult {
  KktReport kkt;
  std::optional<Problem2Report> problem2;
  std::string problem2_error;
  double primal_objective = kNaN;
  double dual_objective = kNaN;
  double gap = kNaN;
  bool gap_pass = false;
  bool model_available = false;
  bool pass = false;
};

/// Runs every available check on a synthesis bundle: the full KKT system,
/// the nonlinear dual constraints and the duality gap when the bundle names
/// a linear plant, or the data-only checks when it carries just an ensemble.
inline CertifyResult run_certify(const json &bundle, const CertifyOptions &o = {}) {
  const json &sol_j = io::require(bundle, "solution", "bundle");
  const DualSolution sol = io::solution_from_json(sol_j);
  const json &prob_j = io::require(bundle, "problem", "bundle");
  const double gamma = bundle.value("gamma", 0.98);
  const io::ProblemSpec prob = io::resolve_problem(prob_j, gamma);

  CertifyResult r;
  if (prob.is_linear()) {
    const TimeVaryingSystem &sys = prob.system();
    const Matrix Z = bundle.contains("Z") ? io::matrix_from_json(bundle.at("Z"), "Z")
                                          : Matrix(Matrix::Identity(sys.n(), sys.n()));
    r.model_available = true;
    r.kkt = check_kkt(sys, prob.cost, Z, sol, build_kkt_certificate(sys, prob.cost, Z),
                      o.tolerance);
    try {
      r.problem2 = check_problem2_feasibility(sol, sys, prob.cost, o.tolerance);
    } catch (const CertificationError &e) {
      r.problem2_error = e.what();
    }
    r.dual_objective = (Z * sol.W).trace();
    try {
      const GainSchedule g = gains_from_dual(sol);
      r.primal_objective = reconstruct_primal(sys, prob.cost, g, Z).objective;
      r.gap = duality_gap(r.primal_objective, sol, Z);
      r.gap_pass = std::abs(r.gap) <= o.gap_tolerance * (1.0 + std::abs(r.primal_objective));
    } catch (const CertificationError &) {
      r.gap_pass = false;
    }
    r.pass = r.kkt.pass && r.problem2 && r.problem2->pass && r.gap_pass;
  } else {
    if (!bundle.contains("ensemble"))
      throw InputError("certify: a nonlinear plant needs the ensemble in the bundle");
    const DataEnsemble ens = io::ensemble_from_json(bundle.at("ensemble"));
    r.kkt = check_kkt_data(ens, prob.cost, sol, o.tolerance);
    r.dual_objective = sol.W.trace();
    r.gap_pass = true;
    r.pass = r.kkt.pass;
  }
  return r;
}

inline json certify_result_to_json(const CertifyResult &r) {
  json j{{"pass", r.pass},
         {"model_available", r.model_available},
         {"kkt", io::kkt_report_to_json(r.kkt)},
         {"dual_objective", r.dual_objective}};
  if (r.model_available) {
    j["primal_objective"] = r.primal_objective;
    j["duality_gap"] = r.gap;
    j["gap_pass"] = r.gap_pass;
    if (r.problem2)
      j["problem2"] = io::problem2_report_to_json(*r.problem2);
    else
      j["problem2"] = json{{"error", r.problem2_error}, {"pass", false}};
  }
  return j;
}

} // namespace ltvlq::pipeline
