#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltvlq {

/// Base class for every error raised by the library. `exit_code()` follows the
/// CLI contract (2 input, 3 rank, 4 solver, 5 certification).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Dimension mismatch, out-of-range index, invalid weight, malformed file.
class InputError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A data matrix failed the full-row-rank requirement at time step `step()`.
class RankError : public Error {
public:
  RankError(std::size_t step, const std::string &what)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  int exit_code() const noexcept override { return 3; }

private:
  std::size_t step_;
};

/// The matrix R(k) + gamma B'P(k+1)B is numerically singular.
class ConditioningError : public Error {
public:
  ConditioningError(std::size_t step, const std::string &what)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  int exit_code() const noexcept override { return 4; }

private:
  std::size_t step_;
};

/// A simulated trajectory produced a non-finite state. `index()` is the time
/// step for single rollouts and the experiment index for ensemble collection.
class DivergenceError : public Error {
public:
  DivergenceError(std::size_t index, const std::string &what)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }
  int exit_code() const noexcept override { return 4; }

private:
  std::size_t index_;
};

class SolverError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// A dual solution cannot be turned into gains (G22 singular or indefinite),
/// or a certificate check failed where the caller required it to pass.
class CertificationError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

} // namespace ltvlq
