#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "certification.hpp"
#include "conic_program.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "lmi_assembler.hpp"
#include "model.hpp"
#include "plants.hpp"
#include "sdp_solver.hpp"

namespace ltvlq::io {

using json = nlohmann::json;

// Matrices are arrays of rows; vectors are flat arrays.
inline json to_json(const Matrix &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vector &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

inline json to_json(const std::vector<Matrix> &ms) {
  json a = json::array();
  for (const auto &m : ms)
    a.push_back(to_json(m));
  return a;
}

inline Matrix matrix_from_json(const json &j, const std::string &what) {
  // A bare number is accepted as a 1x1 matrix.
  if (j.is_number())
    return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw InputError(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json &row = j[static_cast<std::size_t>(i)];
    if (!row.is_array())
      throw InputError(what + ": row " + std::to_string(i) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    }
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(what + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json &v = row[static_cast<std::size_t>(c)];
      if (!v.is_number())
        throw InputError(what + ": non-numeric entry");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const json &j, const std::string &what) {
  if (!j.is_array())
    throw InputError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw InputError(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline std::vector<Matrix> matrices_from_json(const json &j, const std::string &what) {
  if (!j.is_array())
    throw InputError(what + ": expected an array of matrices");
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(matrix_from_json(j[k], what + "[" + std::to_string(k) + "]"));
  return out;
}

inline const json &require(const json &j, const char *key, const std::string &what) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(what + ": missing field '" + key + "'");
  return j.at(key);
}

inline json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw InputError("cannot write " + path.string());
  out << text;
}

inline void write_json_file(const std::filesystem::path &path, const json &j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---- systems and costs ---------------------------------------------------

inline json system_cost_to_json(const TimeVaryingSystem &sys, const CostSpec &cost) {
  return json{{"n", sys.n()},
              {"m", sys.m()},
              {"N", sys.horizon()},
              {"A", to_json(sys.A)},
              {"B", to_json(sys.B)},
              {"Q", to_json(cost.Q)},
              {"R", to_json(cost.R)},
              {"Qf", to_json(cost.Qf)},
              {"gamma", cost.gamma}};
}

/// A problem: plant (linear or nonlinear stepper), cost, initial state.
struct ProblemSpec {
  std::string name;
  Plant plant;
  CostSpec cost;
  Vector x0;

  bool is_linear() const { return std::holds_alternative<TimeVaryingSystem>(plant); }
  const TimeVaryingSystem &system() const {
    if (!is_linear())
      throw InputError(name + ": this mode needs a linear plant model");
    return std::get<TimeVaryingSystem>(plant);
  }
  Eigen::Index n() const {
    return is_linear() ? system().n() : std::get<NonlinearStepper>(plant).n;
  }
  Eigen::Index m() const {
    return is_linear() ? system().m() : std::get<NonlinearStepper>(plant).m;
  }
  std::size_t horizon() const { return cost.horizon(); }
};

inline ProblemSpec builtin_problem(const std::string &name, double gamma) {
  ProblemSpec p;
  p.name = name;
  if (name == "example1") {
    p.plant = plants::example1_system();
    p.cost = plants::example1_cost(gamma);
    p.x0 = plants::example1_x0();
  } else if (name == "example2") {
    p.plant = plants::example2_plant();
    p.cost = plants::example2_cost();
    p.x0 = plants::example2_x0();
  } else {
    throw InputError("unknown built-in plant '" + name + "'");
  }
  return p;
}

/// Parses {"n","m","N","A","B","Q","R","Qf","gamma"} (optional "x0").
inline ProblemSpec problem_from_json(const json &j) {
  const std::string what = "system";
  ProblemSpec p;
  p.name = j.value("name", std::string("custom"));
  TimeVaryingSystem sys;
  sys.A = matrices_from_json(require(j, "A", what), "A");
  sys.B = matrices_from_json(require(j, "B", what), "B");
  const auto n = require(j, "n", what).get<long>();
  const auto m = require(j, "m", what).get<long>();
  const auto N = require(j, "N", what).get<long>();
  if (n < 1 || m < 1 || N < 1)
    throw InputError("system: n, m, N must be >= 1");
  if (sys.A.size() != static_cast<std::size_t>(N) || sys.B.size() != static_cast<std::size_t>(N))
    throw InputError("system: A and B must list N matrices");
  sys.validate();
  if (sys.n() != n || sys.m() != m)
    throw InputError("system: matrix shapes do not match n, m");
  CostSpec cost;
  cost.Q = matrices_from_json(require(j, "Q", what), "Q");
  cost.R = matrices_from_json(require(j, "R", what), "R");
  cost.Qf = matrix_from_json(require(j, "Qf", what), "Qf");
  cost.gamma = require(j, "gamma", what).get<double>();
  cost.normalize();
  cost.validate_against(sys);
  p.x0 = j.contains("x0") ? vector_from_json(j.at("x0"), "x0") : Vector::Zero(n);
  if (p.x0.size() != n)
    throw InputError("x0 has wrong dimension");
  p.plant = std::move(sys);
  p.cost = std::move(cost);
  return p;
}

/// Resolves a plant selector: a built-in name, a path to a system JSON, or an
/// inline system object.
inline ProblemSpec resolve_problem(const json &selector, double gamma,
                                   const std::filesystem::path &base = {}) {
  if (selector.is_string()) {
    const auto s = selector.get<std::string>();
    if (s == "example1" || s == "example2")
      return builtin_problem(s, gamma);
    const std::filesystem::path path = base.empty() ? std::filesystem::path(s) : base / s;
    return problem_from_json(read_json_file(path));
  }
  if (selector.is_object())
    return problem_from_json(selector);
  throw InputError("plant selector must be a name, a path or an object");
}

// ---- ensembles --------------------------------------------------------------

inline json ensemble_to_json(const DataEnsemble &ens, const json &extra_meta = json::object()) {
  json meta = extra_meta;
  meta["l"] = ens.l;
  meta["n"] = ens.n();
  meta["m"] = ens.m();
  meta["N"] = ens.horizon();
  meta["gamma"] = ens.gamma;
  meta["noise_sigma"] = ens.noise_sigma;
  meta["seed"] = ens.seed;
  return json{{"meta", meta}, {"X", to_json(ens.X)}, {"U", to_json(ens.U)}};
}

inline DataEnsemble ensemble_from_json(const json &j) {
  const json &meta = require(j, "meta", "ensemble");
  DataEnsemble ens;
  ens.l = require(meta, "l", "ensemble meta").get<std::size_t>();
  ens.gamma = require(meta, "gamma", "ensemble meta").get<double>();
  ens.noise_sigma = meta.value("noise_sigma", 0.0);
  ens.seed = meta.value("seed", std::uint64_t{0});
  ens.X = matrices_from_json(require(j, "X", "ensemble"), "X");
  ens.U = matrices_from_json(require(j, "U", "ensemble"), "U");
  if (ens.X.size() != ens.U.size() + 1)
    throw InputError("ensemble: X must hold one more matrix than U");
  for (std::size_t k = 0; k < ens.U.size(); ++k)
    if (ens.X[k].cols() != ens.U[k].cols())
      throw InputError("ensemble: X and U column counts differ at " + std::to_string(k));
  ens.restack();
  ens.validate();
  return ens;
}

/// One CSV per time index: rows are experiments, columns x1..xn[,u1..um].
inline void write_ensemble_csv(const std::filesystem::path &dir, const DataEnsemble &ens) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < ens.X.size(); ++k) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < ens.n(); ++i)
      os << (i ? "," : "") << 'x' << i + 1;
    if (k < ens.U.size())
      for (Eigen::Index i = 0; i < ens.m(); ++i)
        os << ",u" << i + 1;
    os << '\n';
    for (std::size_t j = 0; j < ens.l; ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      for (Eigen::Index i = 0; i < ens.n(); ++i)
        os << (i ? "," : "") << ens.X[k](i, c);
      if (k < ens.U.size())
        for (Eigen::Index i = 0; i < ens.m(); ++i)
          os << ',' << ens.U[k](i, c);
      os << '\n';
    }
    write_text_file(dir / ("k" + std::to_string(k) + ".csv"), os.str());
  }
}

// ---- programs, solutions, reports ------------------------------------------

/// {vars, objective:[[idx, coef]], blocks:[{label, size, F0, terms:[[idx, F]]}]}
/// with only nonzero objective entries listed.
inline json program_to_json(const ConicProgram &prog) {
  json obj = json::array();
  for (Eigen::Index i = 0; i < prog.objective.size(); ++i)
    if (prog.objective(i) != 0.0)
      obj.push_back(json::array({i, prog.objective(i)}));
  json blocks = json::array();
  for (const auto &b : prog.blocks) {
    json terms = json::array();
    for (const auto &t : b.terms)
      terms.push_back(json::array({t.var, to_json(t.coef)}));
    blocks.push_back(json{{"label", b.label},
                          {"size", b.size},
                          {"F0", to_json(b.constant)},
                          {"terms", terms}});
  }
  return json{{"vars", prog.num_vars}, {"objective", obj}, {"blocks", blocks}};
}

inline ConicProgram program_from_json(const json &j) {
  ConicProgram prog;
  prog.num_vars = require(j, "vars", "program").get<std::size_t>();
  prog.objective = Vector::Zero(static_cast<Eigen::Index>(prog.num_vars));
  for (const auto &e : require(j, "objective", "program")) {
    const auto idx = e.at(0).get<std::size_t>();
    if (idx >= prog.num_vars)
      throw InputError("program: objective index out of range");
    prog.objective(static_cast<Eigen::Index>(idx)) = e.at(1).get<double>();
  }
  for (const auto &bj : require(j, "blocks", "program")) {
    LmiBlock b;
    b.label = bj.value("label", std::string());
    b.size = require(bj, "size", "block").get<Eigen::Index>();
    b.constant = matrix_from_json(require(bj, "F0", "block"), "F0");
    for (const auto &t : require(bj, "terms", "block"))
      b.terms.push_back({t.at(0).get<std::size_t>(), matrix_from_json(t.at(1), "F_i")});
    prog.blocks.push_back(std::move(b));
  }
  prog.validate();
  return prog;
}

inline json solution_to_json(const DualSolution &sol) {
  return json{{"W", to_json(sol.W)}, {"G", to_json(sol.G)}, {"objective", sol.objective}};
}

inline DualSolution solution_from_json(const json &j) {
  DualSolution sol;
  sol.W = matrix_from_json(require(j, "W", "solution"), "W");
  sol.G = matrices_from_json(require(j, "G", "solution"), "G");
  sol.objective = j.value("objective", sol.W.trace());
  return sol;
}

inline json gains_to_json(const GainSchedule &g) { return to_json(g.K); }

inline GainSchedule gains_from_json(const json &j) {
  return GainSchedule{matrices_from_json(j, "K")};
}

inline json solver_summary_to_json(const SolverResult &r) {
  return json{{"status", to_string(r.status)},
              {"message", r.message},
              {"iterations", r.iterations},
              {"gap", r.gap},
              {"abs_gap", r.abs_gap},
              {"primal_res", r.primal_res},
              {"dual_res", r.dual_res},
              {"objective", r.primal_objective},
              {"wall_time", r.wall_time}};
}

inline json kkt_report_to_json(const KktReport &rep) {
  json items = json::object();
  for (const auto &it : rep.items) {
    json e{{"description", it.description}, {"skipped", it.skipped}};
    if (!it.skipped) {
      e["residual"] = it.residual;
      e["index"] = it.index;
      e["pass"] = it.residual <= rep.tolerance * rep.scale;
    }
    items[it.label] = e;
  }
  return json{{"sign_convention", rep.sign_convention},
              {"tolerance", rep.tolerance},
              {"scale", rep.scale},
              {"max_residual", rep.max_residual},
              {"pass", rep.pass},
              {"failures", rep.failures()},
              {"conditions", items}};
}

inline json problem2_report_to_json(const Problem2Report &rep) {
  json rows = json::array();
  for (const auto &c : rep.constraints)
    rows.push_back(json{{"label", c.label},
                        {"index", c.index},
                        {"min_eigenvalue", c.min_eigenvalue},
                        {"residual", c.residual}});
  return json{{"min_eigenvalue", rep.min_eigenvalue},
              {"scale", rep.scale},
              {"tolerance", rep.tolerance},
              {"pass", rep.pass},
              {"constraints", rows}};
}

/// Tidy CSV rows (k, value, series) for one trajectory: state components,
/// inputs and the state norm.
inline void append_trajectory_csv(std::ostream &os, const Trajectory &traj,
                                  const std::string &series) {
  os << std::setprecision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Vector &x = traj.states[k];
    for (Eigen::Index i = 0; i < x.size(); ++i)
      os << k << ',' << x(i) << ',' << series << ":x" << i + 1 << '\n';
    os << k << ',' << x.norm() << ',' << series << ":norm\n";
    if (k < traj.inputs.size())
      for (Eigen::Index i = 0; i < traj.inputs[k].size(); ++i)
        os << k << ',' << traj.inputs[k](i) << ',' << series << ":u" << i + 1 << '\n';
  }
}

} // namespace ltvlq::io
