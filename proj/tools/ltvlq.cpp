// ltvlq: command-line front end for the finite-horizon LQ synthesis pipeline.
//
//   ltvlq <mode> [--config <path>] [--out <dir>] [--seed <u64>] [--gamma <f>]
//                [--l <int>] [--sigma <f>] [--runs <int>]
//
// LTVLQ_LOG=quiet|info|debug sets verbosity (debug also prints solver iterations).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <ltvlq/experiments.hpp>

namespace fs = std::filesystem;
using namespace ltvlq;
using io::json;

namespace {

int g_log_level = 1;

void log(int level, const std::string &msg) {
  if (level <= g_log_level)
    std::cerr << "[ltvlq] " << msg << '\n';
}

int parse_log_level() {
  const char *env = std::getenv("LTVLQ_LOG");
  if (!env)
    return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0" || v == "error")
    return 0;
  if (v == "debug" || v == "2" || v == "trace")
    return 2;
  return 1;
}

// Command-line values, each overriding its config counterpart when present.
struct Overrides {
  std::string mode;
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;
  std::optional<std::size_t> l;
  std::optional<double> sigma;
  std::optional<std::size_t> runs;
};

struct Context {
  Overrides cli;
  json config = json::object();
  fs::path base; // directory of the config file, for relative plant paths
  fs::path out;
};

template <class T> T pick(const std::optional<T> &flag, const json &cfg, const char *key, T def) {
  if (flag)
    return *flag;
  if (cfg.contains(key))
    return cfg.at(key).get<T>();
  return def;
}

const json &section(const json &cfg, const char *key) {
  static const json empty = json::object();
  return cfg.contains(key) ? cfg.at(key) : empty;
}

SolverOptions solver_options(const json &cfg) {
  SolverOptions o;
  const json &s = section(cfg, "solver");
  o.max_iterations = s.value("max_iterations", o.max_iterations);
  o.gap_tol = s.value("gap_tol", o.gap_tol);
  o.feas_tol = s.value("feas_tol", o.feas_tol);
  o.acceptable_tol = s.value("acceptable_tol", o.acceptable_tol);
  o.step_fraction = s.value("step_fraction", o.step_fraction);
  o.refinement_steps = s.value("refinement_steps", o.refinement_steps);
  const std::string dir = s.value("direction", std::string("nt"));
  if (dir == "nt")
    o.direction = SearchDirection::nt;
  else if (dir == "hkm")
    o.direction = SearchDirection::hkm;
  else
    throw InputError("solver.direction must be 'nt' or 'hkm'");
  o.verbosity = g_log_level >= 2 ? 1 : 0;
  o.validate();
  return o;
}

ExcitationSpec excitation_spec(const json &ens) {
  ExcitationSpec e;
  const json &x = section(ens, "excitation");
  const std::string kind = x.value("kind", std::string("gaussian_white"));
  if (kind == "gaussian_white")
    e.kind = ExcitationKind::gaussian_white;
  else if (kind == "sum_of_sinusoids")
    e.kind = ExcitationKind::sum_of_sinusoids;
  else if (kind == "piecewise_constant")
    e.kind = ExcitationKind::piecewise_constant;
  else
    throw InputError("unknown excitation kind '" + kind + "'");
  e.amplitude = x.value("amplitude", e.amplitude);
  e.sinusoid_count = x.value("sinusoid_count", e.sinusoid_count);
  e.freq_low = x.value("freq_low", e.freq_low);
  e.freq_high = x.value("freq_high", e.freq_high);
  e.dwell = x.value("dwell", e.dwell);
  e.validate();
  return e;
}

io::ProblemSpec load_problem(const Context &ctx) {
  const json sel = ctx.config.contains("plant") ? ctx.config.at("plant") : json("example1");
  const double gamma = pick(ctx.cli.gamma, ctx.config, "gamma", 0.98);
  io::ProblemSpec p = io::resolve_problem(sel, gamma, ctx.base);
  if (!sel.is_string() || (sel != "example1" && sel != "example2")) {
    if (ctx.cli.gamma || ctx.config.contains("gamma")) {
      p.cost.gamma = gamma;
      p.cost.normalize();
    }
  }
  if (ctx.config.contains("x0")) {
    p.x0 = io::vector_from_json(ctx.config.at("x0"), "x0");
    if (p.x0.size() != p.n())
      throw InputError("x0 has wrong dimension");
  }
  return p;
}

// A bundle stores the plant by name for built-ins and inline otherwise.
json problem_json(const io::ProblemSpec &p) {
  if (p.name == "example1" || p.name == "example2")
    return p.name;
  json j = io::system_cost_to_json(p.system(), p.cost);
  j["name"] = p.name;
  j["x0"] = io::to_json(p.x0);
  return j;
}

json bundle_header(const Context &ctx, json seeds) {
  return json{{"mode", ctx.cli.mode}, {"config", ctx.config}, {"seeds", std::move(seeds)}};
}

void write_iterations(const fs::path &path, const SolverResult &r) {
  std::ostringstream os;
  write_iteration_log(os, r);
  io::write_text_file(path, os.str());
}

void write_trajectories(const fs::path &path,
                        const std::vector<std::pair<std::string, const Trajectory *>> &series) {
  std::ostringstream os;
  os << "k,value,series\n";
  for (const auto &[name, traj] : series)
    io::append_trajectory_csv(os, *traj, name);
  io::write_text_file(path, os.str());
}

json synthesis_json(const pipeline::Synthesis &s) {
  return json{{"solver", io::solver_summary_to_json(s.solver)},
              {"num_vars", s.num_vars},
              {"num_blocks", s.num_blocks},
              {"solution", io::solution_to_json(s.solution)},
              {"gains", io::gains_to_json(s.gains)}};
}

// Adds the closed-loop cost, primal objective and gap for a linear plant.
void add_linear_metrics(json &b, const io::ProblemSpec &p, const pipeline::Synthesis &s,
                        const Matrix &Z, Trajectory &traj) {
  const TimeVaryingSystem &sys = p.system();
  traj = simulate_closed_loop(sys, s.gains, p.x0);
  b["cost"] = evaluate_cost(p.cost, traj);
  const double primal = reconstruct_primal(sys, p.cost, s.gains, Z).objective;
  b["primal_objective"] = primal;
  b["duality_gap"] = duality_gap(primal, s.solution, Z);
  const ValueMatrices vm = solve_dre(sys, p.cost);
  b["riccati_trace_P0"] = vm.P[0].trace();
  b["max_gain_error"] = pipeline::max_gain_error(s.gains, optimal_gains(sys, p.cost, vm));
}

// ---- modes ---------------------------------------------------------------

int mode_riccati(const Context &ctx) {
  const io::ProblemSpec p = load_problem(ctx);
  const TimeVaryingSystem &sys = p.system();
  const ValueMatrices vm = solve_dre(sys, p.cost);
  const GainSchedule g = optimal_gains(sys, p.cost, vm);
  const auto qf = qfunction_matrices(sys, p.cost, vm);
  const Trajectory traj = simulate_closed_loop(sys, g, p.x0);
  json b = bundle_header(ctx, json::object());
  b["problem"] = problem_json(p);
  b["gamma"] = p.cost.gamma;
  b["P"] = io::to_json(vm.P);
  b["gains"] = io::gains_to_json(g);
  b["G_hat"] = io::to_json(qf.G_hat);
  b["W_hat"] = io::to_json(qf.W_hat);
  b["x0"] = io::to_json(p.x0);
  b["cost"] = evaluate_cost(p.cost, traj);
  b["trace_P0"] = vm.P[0].trace();
  // A solution entry makes this an oracle bundle that `certify` accepts.
  b["solution"] = json{{"W", io::to_json(qf.W_hat)},
                       {"G", io::to_json(qf.G_hat)},
                       {"objective", qf.W_hat.trace()}};
  io::write_json_file(ctx.out / "riccati.json", b);
  write_trajectories(ctx.out / "trajectories.csv", {{"riccati", &traj}});
  log(1, "riccati: J(x0) = " + std::to_string(b["cost"].get<double>()) + ", trace P(0) = " +
             std::to_string(b["trace_P0"].get<double>()));
  return 0;
}

int mode_synth_model_based(const Context &ctx) {
  const io::ProblemSpec p = load_problem(ctx);
  const TimeVaryingSystem &sys = p.system();
  const Matrix Z = ctx.config.contains("Z") ? io::matrix_from_json(ctx.config.at("Z"), "Z")
                                            : Matrix(Matrix::Identity(p.n(), p.n()));
  const auto s = pipeline::synthesize(assemble_model_based(sys, p.cost, Z), p.n(), p.m(),
                                      p.horizon(), solver_options(ctx.config));
  json b = bundle_header(ctx, json::object());
  b["problem"] = problem_json(p);
  b["gamma"] = p.cost.gamma;
  b["Z"] = io::to_json(Z);
  b.update(synthesis_json(s));
  Trajectory traj;
  add_linear_metrics(b, p, s, Z, traj);
  const KktReport kkt = check_kkt(sys, p.cost, Z, s.solution, build_kkt_certificate(sys, p.cost, Z));
  b["kkt"] = io::kkt_report_to_json(kkt);
  io::write_json_file(ctx.out / "bundle.json", b);
  write_iterations(ctx.out / "iterations.csv", s.solver);
  write_trajectories(ctx.out / "trajectories.csv", {{"closed_loop", &traj}});
  log(1, "synth-model-based: " + std::string(to_string(s.solver.status)) + ", trace W = " +
             std::to_string(s.solution.objective) + ", J(x0) = " +
             std::to_string(b["cost"].get<double>()));
  return 0;
}

int mode_synth_data_ltv(const Context &ctx) {
  const io::ProblemSpec p = load_problem(ctx);
  const json &ecfg = section(ctx.config, "ensemble");
  pipeline::EnsembleOptions eo;
  eo.l = pick(ctx.cli.l, ecfg, "l", static_cast<std::size_t>(p.n() + p.m()));
  eo.sigma = pick(ctx.cli.sigma, ecfg, "sigma", 0.0);
  eo.seed = pick(ctx.cli.seed, ecfg, "seed", std::uint64_t{1});
  eo.excitation = excitation_spec(ecfg);
  eo.init_scale = ecfg.value("init_scale", 1.0);
  const DataEnsemble ens = pipeline::make_ensemble(p.plant, p.n(), p.m(), p.horizon(),
                                                   p.cost.gamma, eo);
  const auto s = pipeline::synthesize(assemble_model_free_ltv(ens, p.cost), p.n(), p.m(),
                                      p.horizon(), solver_options(ctx.config));
  json b = bundle_header(ctx, json{{"excitation", eo.seed},
                                   {"noise", pipeline::noise_seed(eo.seed)}});
  b["problem"] = problem_json(p);
  b["gamma"] = p.cost.gamma;
  b["ensemble"] = io::ensemble_to_json(ens);
  b.update(synthesis_json(s));
  b["kkt"] = io::kkt_report_to_json(check_kkt_data(ens, p.cost, s.solution));
  Trajectory traj;
  if (p.is_linear()) {
    add_linear_metrics(b, p, s, Matrix::Identity(p.n(), p.n()), traj);
  } else {
    traj = simulate_nonlinear_closed_loop(std::get<NonlinearStepper>(p.plant), s.gains, p.x0);
    b["cost"] = evaluate_cost(p.cost, traj);
    b["ratio"] = traj.states.back().norm() / p.x0.norm();
  }
  io::write_json_file(ctx.out / "bundle.json", b);
  io::write_ensemble_csv(ctx.out / "ensemble", ens);
  write_iterations(ctx.out / "iterations.csv", s.solver);
  write_trajectories(ctx.out / "trajectories.csv", {{"closed_loop", &traj}});
  log(1, "synth-data-ltv: " + std::string(to_string(s.solver.status)) + ", trace W = " +
             std::to_string(s.solution.objective));
  return 0;
}

bool time_invariant(const io::ProblemSpec &p) {
  const TimeVaryingSystem &sys = p.system();
  for (std::size_t k = 1; k < sys.horizon(); ++k)
    if (sys.A[k] != sys.A[0] || sys.B[k] != sys.B[0] || p.cost.Q[k] != p.cost.Q[0] ||
        p.cost.R[k] != p.cost.R[0])
      return false;
  return true;
}

int mode_synth_data_lti(const Context &ctx) {
  const io::ProblemSpec p = load_problem(ctx);
  if (!p.is_linear() || !time_invariant(p))
    throw InputError("synth-data-lti needs a time-invariant linear plant and stage weights");
  const TimeVaryingSystem &sys = p.system();
  const auto n = p.n(), m = p.m();
  const json &lcfg = section(ctx.config, "lti");
  const std::size_t s = lcfg.value("s", static_cast<std::size_t>(n + m));
  const std::size_t k0 = lcfg.value("k0", std::size_t{0});
  const std::uint64_t seed = pick(ctx.cli.seed, lcfg, "seed", std::uint64_t{1});
  // One experiment: s inputs after k0 give the s columns of L and X_L.
  const std::size_t len = k0 + s;
  TimeVaryingSystem lti;
  lti.A.assign(len, sys.A[0]);
  lti.B.assign(len, sys.B[0]);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector xi(n);
  for (Eigen::Index i = 0; i < n; ++i)
    xi(i) = nd(rng);
  ExcitationSpec es = excitation_spec(lcfg);
  es.seed = seed + 1;
  const Trajectory traj = simulate_open_loop(lti, xi, generate_excitation(es, m, len));
  const LtiTrajectoryData data = build_lti_trajectory_data(traj, n, m, k0, s);
  const std::size_t N = p.horizon();
  const auto syn = pipeline::synthesize(
      assemble_model_free_lti(data, p.cost.Q[0], p.cost.R[0], p.cost.Qf, p.cost.gamma, N), n, m,
      N, solver_options(ctx.config));
  json b = bundle_header(ctx, json{{"initial_state", seed}, {"excitation", es.seed}});
  b["problem"] = problem_json(p);
  b["gamma"] = p.cost.gamma;
  b["lti_data"] = json{{"L", io::to_json(data.L)}, {"X_L", io::to_json(data.X_L)},
                       {"s", data.s}, {"k0", data.k0}};
  b.update(synthesis_json(syn));
  Trajectory cl;
  add_linear_metrics(b, p, syn, Matrix::Identity(n, n), cl);
  io::write_json_file(ctx.out / "bundle.json", b);
  write_iterations(ctx.out / "iterations.csv", syn.solver);
  write_trajectories(ctx.out / "trajectories.csv", {{"experiment", &traj}, {"closed_loop", &cl}});
  log(1, "synth-data-lti: " + std::string(to_string(syn.solver.status)) +
             ", max gain error vs Riccati = " +
             std::to_string(b["max_gain_error"].get<double>()));
  return 0;
}

int mode_certify(const Context &ctx) {
  json bundle = ctx.config;
  if (!bundle.contains("solution")) {
    if (!bundle.contains("bundle"))
      throw InputError("certify: --config must be a synthesis bundle or name one under 'bundle'");
    bundle = io::read_json_file(ctx.base / bundle.at("bundle").get<std::string>());
  }
  pipeline::CertifyOptions co;
  co.tolerance = ctx.config.value("tolerance", co.tolerance);
  co.gap_tolerance = ctx.config.value("gap_tolerance", co.gap_tolerance);
  const auto r = pipeline::run_certify(bundle, co);
  json out = pipeline::certify_result_to_json(r);
  out["seeds"] = bundle.value("seeds", json::object());
  io::write_json_file(ctx.out / "certify.json", out);
  if (!r.pass) {
    std::string names;
    for (const auto &f : r.kkt.failures())
      names += (names.empty() ? "" : ", ") + f;
    log(0, "certify: FAIL" + (names.empty() ? std::string() : " (" + names + ")"));
    return CertificationError("").exit_code();
  }
  log(1, "certify: pass, max residual " + std::to_string(r.kkt.max_residual) + " (scale " +
             std::to_string(r.kkt.scale) + ")");
  return 0;
}

json path_json(const pipeline::PathResult &p) {
  json j{{"path", p.path},
         {"cost", p.cost},
         {"objective", p.objective},
         {"max_gain_error", p.max_gain_error},
         {"primal_objective", p.primal_objective},
         {"gains", io::gains_to_json(p.gains)}};
  if (p.synthesis) {
    j.update(synthesis_json(*p.synthesis));
    j["duality_gap"] = p.duality_gap;
  }
  if (p.kkt)
    j["kkt"] = io::kkt_report_to_json(*p.kkt);
  return j;
}

int mode_example1(const Context &ctx) {
  pipeline::Example1Options o;
  o.gamma = pick(ctx.cli.gamma, ctx.config, "gamma", o.gamma);
  o.l = pick(ctx.cli.l, ctx.config, "l", o.l);
  o.sigma = pick(ctx.cli.sigma, ctx.config, "sigma", o.sigma);
  o.seed = pick(ctx.cli.seed, ctx.config, "seed", o.seed);
  const std::string path = ctx.config.value("path", std::string("both"));
  if (path != "both" && path != "model-based" && path != "data")
    throw InputError("example1: path must be 'both', 'model-based' or 'data'");
  o.model_based = path != "data";
  o.data = path != "model-based";
  o.solver = solver_options(ctx.config);
  const auto r = pipeline::run_example1(o);

  json b = bundle_header(ctx, json{{"excitation", o.seed}, {"noise", pipeline::noise_seed(o.seed)}});
  b["problem"] = "example1";
  b["gamma"] = o.gamma;
  b["l"] = o.l;
  b["sigma"] = o.sigma;
  b["x0"] = io::to_json(r.x0);
  b["riccati"] = path_json(r.riccati);
  std::vector<std::pair<std::string, const Trajectory *>> series{{"riccati", &r.riccati.closed_loop}};
  if (r.model_based) {
    b["model_based"] = path_json(*r.model_based);
    series.emplace_back("model_based", &r.model_based->closed_loop);
    write_iterations(ctx.out / "iterations_model_based.csv", r.model_based->synthesis->solver);
    // Stand-alone bundle for `certify`.
    json cb = bundle_header(ctx, b["seeds"]);
    cb["problem"] = "example1";
    cb["gamma"] = o.gamma;
    cb["Z"] = io::to_json(Matrix(Matrix::Identity(4, 4)));
    cb.update(synthesis_json(*r.model_based->synthesis));
    io::write_json_file(ctx.out / "bundle_model_based.json", cb);
  }
  if (r.data) {
    b["data"] = path_json(*r.data);
    b["ensemble"] = io::ensemble_to_json(*r.ensemble);
    series.emplace_back("data", &r.data->closed_loop);
    write_iterations(ctx.out / "iterations_data.csv", r.data->synthesis->solver);
    io::write_ensemble_csv(ctx.out / "ensemble", *r.ensemble);
    json cb = bundle_header(ctx, b["seeds"]);
    cb["problem"] = "example1";
    cb["gamma"] = o.gamma;
    cb["Z"] = io::to_json(Matrix(Matrix::Identity(4, 4)));
    cb["ensemble"] = b["ensemble"];
    cb.update(synthesis_json(*r.data->synthesis));
    io::write_json_file(ctx.out / "bundle_data.json", cb);
  }
  io::write_json_file(ctx.out / "example1.json", b);
  write_trajectories(ctx.out / "trajectories.csv", series);

  std::ostringstream msg;
  msg << "example1 (gamma=" << o.gamma << "): J riccati " << r.riccati.cost;
  if (r.model_based)
    msg << ", model-based " << r.model_based->cost;
  if (r.data)
    msg << ", data(l=" << o.l << ", sigma=" << o.sigma << ") " << r.data->cost;
  log(1, msg.str());
  bool cert_ok = true;
  if (r.model_based)
    cert_ok = cert_ok && r.model_based->kkt->pass;
  if (r.data)
    cert_ok = cert_ok && r.data->kkt->pass;
  if (!cert_ok) {
    log(0, "example1: certification failed");
    return CertificationError("").exit_code();
  }
  return 0;
}

int mode_example2(const Context &ctx) {
  pipeline::Example2Options o;
  o.seed = pick(ctx.cli.seed, ctx.config, "seed", o.seed);
  o.l = pick(ctx.cli.l, ctx.config, "l", o.l);
  o.amplitude = ctx.config.value("amplitude", o.amplitude);
  o.init_scale = ctx.config.value("init_scale", o.init_scale);
  o.solver = solver_options(ctx.config);
  const auto r = pipeline::run_example2(o);
  json b = bundle_header(ctx, json{{"base", o.seed},
                                   {"excitation", r.seed_used},
                                   {"noise", pipeline::noise_seed(r.seed_used)}});
  b["problem"] = "example2";
  b["gamma"] = r.ensemble.gamma;
  b["attempts"] = r.attempts;
  b["amplitude_used"] = r.amplitude_used;
  b["ensemble"] = io::ensemble_to_json(r.ensemble);
  b.update(synthesis_json(r.synthesis));
  b["kkt"] = io::kkt_report_to_json(r.kkt);
  b["x0"] = io::to_json(r.x0);
  b["ratio"] = r.ratio;
  b["closed_loop_cost"] = evaluate_cost(plants::example2_cost(), r.closed_loop);
  b["open_loop"] = json{{"peak_norm", r.open_loop_peak},
                        {"final_norm", r.open_loop.states.back().norm()},
                        {"steps", r.open_loop.inputs.size()},
                        {"first_exceeding_step", r.open_loop_exceeds},
                        {"diverged", r.open_loop_diverged}};
  io::write_json_file(ctx.out / "bundle.json", b);
  io::write_ensemble_csv(ctx.out / "ensemble", r.ensemble);
  write_iterations(ctx.out / "iterations.csv", r.synthesis.solver);
  write_trajectories(ctx.out / "trajectories.csv",
                     {{"closed_loop", &r.closed_loop}, {"open_loop", &r.open_loop}});
  std::ostringstream msg;
  msg << "example2 (seed " << o.seed << ", " << r.attempts << " attempt(s)): |x(N)|/|x(0)| = "
      << r.ratio << ", open-loop peak |x| = " << r.open_loop_peak;
  log(1, msg.str());
  if (!r.kkt.pass) {
    log(0, "example2: certification failed");
    return CertificationError("").exit_code();
  }
  return 0;
}

int mode_monte_carlo(const Context &ctx) {
  pipeline::MonteCarloOptions o;
  const json &mc = section(ctx.config, "monte_carlo");
  o.runs = pick(ctx.cli.runs, mc, "runs", o.runs);
  o.l = pick(ctx.cli.l, mc, "l", o.l);
  o.seed = pick(ctx.cli.seed, mc, "seed", o.seed);
  o.gamma = pick(ctx.cli.gamma, mc, "gamma", o.gamma);
  o.threads = mc.value("threads", 0u);
  if (ctx.cli.sigma)
    o.sigmas = {*ctx.cli.sigma};
  else if (mc.contains("sigmas"))
    o.sigmas = mc.at("sigmas").get<std::vector<double>>();
  o.solver = solver_options(ctx.config);
  const auto s = pipeline::run_monte_carlo(o);

  json rows = json::array();
  std::ostringstream csv;
  csv << std::setprecision(15) << "sigma,runs,failures,mean_cost,std_cost,mean_wall_time\n";
  for (const auto &r : s.rows) {
    rows.push_back(json{{"sigma", r.sigma},
                        {"runs", r.runs},
                        {"failures", r.failures},
                        {"mean_cost", r.mean_cost},
                        {"std_cost", r.std_cost},
                        {"mean_wall_time", r.mean_wall_time}});
    csv << r.sigma << ',' << r.runs << ',' << r.failures << ',' << r.mean_cost << ','
        << r.std_cost << ',' << r.mean_wall_time << '\n';
    std::ostringstream msg;
    msg << "sigma " << r.sigma << ": mean J " << r.mean_cost << " (std " << r.std_cost << "), "
        << r.failures << "/" << r.runs << " failures";
    log(1, msg.str());
  }
  std::ostringstream runs_csv;
  runs_csv << std::setprecision(15) << "sigma,seed,ok,cost,wall_time,failure\n";
  for (const auto &r : s.runs) {
    std::string why = r.failure;
    for (char &c : why)
      if (c == ',' || c == '\n')
        c = ';';
    runs_csv << r.sigma << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << r.cost << ','
             << r.wall_time << ',' << why << '\n';
  }
  json b = bundle_header(ctx, json{{"base", o.seed}, {"first", o.seed}, {"last", o.seed + o.runs - 1}});
  b["l"] = o.l;
  b["gamma"] = o.gamma;
  b["runs"] = o.runs;
  b["sigmas"] = o.sigmas;
  b["rows"] = rows;
  io::write_json_file(ctx.out / "summary.json", b);
  io::write_text_file(ctx.out / "summary.csv", csv.str());
  io::write_text_file(ctx.out / "runs.csv", runs_csv.str());
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  g_log_level = parse_log_level();
  CLI::App app{"Finite-horizon LQ gain synthesis for LTV systems via semidefinite programming"};
  Overrides cli;
  app.add_option("mode", cli.mode, "riccati | synth-model-based | synth-data-ltv | synth-data-lti | "
                                   "certify | example1 | example2 | monte-carlo")
      ->required()
      ->check(CLI::IsMember({"riccati", "synth-model-based", "synth-data-ltv", "synth-data-lti",
                             "certify", "example1", "example2", "monte-carlo"}));
  app.add_option("--config", cli.config_path, "JSON config (for certify: a synthesis bundle)");
  app.add_option("--out", cli.out, "output directory (default out/<mode>)");
  std::uint64_t seed = 0;
  double gamma = 0.0, sigma = 0.0;
  std::size_t l = 0, runs = 0;
  auto *o_seed = app.add_option("--seed", seed, "base seed");
  auto *o_gamma = app.add_option("--gamma", gamma, "discount factor in (0, 1]");
  auto *o_l = app.add_option("--l", l, "number of experiments");
  auto *o_sigma = app.add_option("--sigma", sigma, "measurement noise standard deviation");
  auto *o_runs = app.add_option("--runs", runs, "Monte Carlo runs per sigma");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (o_seed->count())
    cli.seed = seed;
  if (o_gamma->count())
    cli.gamma = gamma;
  if (o_l->count())
    cli.l = l;
  if (o_sigma->count())
    cli.sigma = sigma;
  if (o_runs->count())
    cli.runs = runs;

  try {
    Context ctx;
    ctx.cli = cli;
    if (!cli.config_path.empty()) {
      ctx.config = io::read_json_file(cli.config_path);
      if (!ctx.config.is_object())
        throw InputError("config must be a JSON object");
      ctx.base = fs::path(cli.config_path).parent_path();
    } else if (cli.mode == "certify") {
      throw InputError("certify needs --config <bundle>");
    }
    ctx.out = !cli.out.empty() ? fs::path(cli.out)
              : ctx.config.contains("out") ? fs::path(ctx.config.at("out").get<std::string>())
                                           : fs::path("out") / cli.mode;
    fs::create_directories(ctx.out);

    if (cli.mode == "riccati")
      return mode_riccati(ctx);
    if (cli.mode == "synth-model-based")
      return mode_synth_model_based(ctx);
    if (cli.mode == "synth-data-ltv")
      return mode_synth_data_ltv(ctx);
    if (cli.mode == "synth-data-lti")
      return mode_synth_data_lti(ctx);
    if (cli.mode == "certify")
      return mode_certify(ctx);
    if (cli.mode == "example1")
      return mode_example1(ctx);
    if (cli.mode == "example2")
      return mode_example2(ctx);
    return mode_monte_carlo(ctx);
  } catch (const RankError &e) {
    log(0, std::string("rank failure at k=") + std::to_string(e.step()) + ": " + e.what());
    return e.exit_code();
  } catch (const Error &e) {
    log(0, e.what());
    return e.exit_code();
  } catch (const json::exception &e) {
    log(0, std::string("malformed JSON: ") + e.what());
    return 2;
  } catch (const fs::filesystem_error &e) {
    log(0, e.what());
    return 2;
  }
}
