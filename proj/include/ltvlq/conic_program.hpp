#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace ltvlq {

/// One coefficient matrix F_i of an LMI block.
struct LmiTerm {
  std::size_t var = 0;
  Matrix coef;
};

/// Affine PSD constraint  F0 + sum_i y_i F_i >= 0. Only variables with a
/// nonzero coefficient appear in `terms`.
struct LmiBlock {
  Eigen::Index size = 0;
  Matrix constant;
  std::vector<LmiTerm> terms;
  std::string label;

  Matrix evaluate(const Vector &y) const {
    Matrix out = constant;
    for (const auto &t : terms)
      out.noalias() += y(static_cast<Eigen::Index>(t.var)) * t.coef;
    return out;
  }
};

/// maximize c'y  subject to  F0_b + sum_i y_i F_{i,b} >= 0 for every block b.
struct ConicProgram {
  std::size_t num_vars = 0;
  Vector objective;
  std::vector<LmiBlock> blocks;

  double objective_value(const Vector &y) const { return objective.dot(y); }

  void validate() const {
    if (objective.size() != static_cast<Eigen::Index>(num_vars))
      throw InputError("conic program: objective length does not match "
                       "variable count");
    for (const auto &b : blocks) {
      linalg::require_shape(b.constant, b.size, b.size, "block " + b.label + " F0");
      if (linalg::asymmetry(b.constant) > 1e-12)
        throw InputError("block " + b.label + ": F0 is not symmetric");
      for (const auto &t : b.terms) {
        if (t.var >= num_vars)
          throw InputError("block " + b.label + ": variable index out of range");
        linalg::require_shape(t.coef, b.size, b.size, "block " + b.label + " F_i");
        if (linalg::asymmetry(t.coef) > 1e-12)
          throw InputError("block " + b.label + ": coefficient of variable " +
                           std::to_string(t.var) + " is not symmetric");
      }
    }
  }
};

/// Residuals of a candidate (y, S, M) for the program above and its dual
///   minimize <F0, M>  s.t.  <F_i, M> = -c_i,  M >= 0.
struct ResidualReport {
  std::vector<double> primal;          // ||F0 + sum y_i F_i - S||_F per block
  double dual = 0.0;                   // ||c - A*(M)||, A*(M)_i = -sum_b <F_i,M>
  std::vector<double> complementarity; // <S, M> per block

  double max_primal() const {
    double r = 0.0;
    for (double p : primal)
      r = std::max(r, p);
    return r;
  }
  double total_complementarity() const {
    double s = 0.0;
    for (double v : complementarity)
      s += v;
    return s;
  }
};

inline ResidualReport residuals(const ConicProgram &prog, const Vector &y,
                                const std::vector<Matrix> &slacks,
                                const std::vector<Matrix> &multipliers) {
  if (y.size() != static_cast<Eigen::Index>(prog.num_vars) ||
      slacks.size() != prog.blocks.size() ||
      multipliers.size() != prog.blocks.size())
    throw InputError("residuals: shape mismatch");
  ResidualReport rep;
  Vector adj = Vector::Zero(static_cast<Eigen::Index>(prog.num_vars));
  for (std::size_t b = 0; b < prog.blocks.size(); ++b) {
    const auto &blk = prog.blocks[b];
    linalg::require_shape(slacks[b], blk.size, blk.size, "residuals slack");
    linalg::require_shape(multipliers[b], blk.size, blk.size, "residuals multiplier");
    rep.primal.push_back((blk.evaluate(y) - slacks[b]).norm());
    rep.complementarity.push_back((slacks[b].cwiseProduct(multipliers[b])).sum());
    for (const auto &t : blk.terms)
      adj(static_cast<Eigen::Index>(t.var)) -= (t.coef.cwiseProduct(multipliers[b])).sum();
  }
  rep.dual = (prog.objective - adj).norm();
  return rep;
}

} // namespace ltvlq
