#pragma once

#include <stdexcept>
#include <string>

namespace zempc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad dimensions, non-positive scale, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced while evaluating the column model.
class ModelError : public Error {
 public:
  ModelError(const std::string& what, int stage)
      : Error(what + " (stage " + std::to_string(stage) + ")"), stage_(stage) {}
  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

/// State blew up during time integration.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time)
      : Error(what + " at t = " + std::to_string(time) + " s"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Iterative method ran out of budget; carries the best residual reached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what + " (best residual " + std::to_string(best_residual) + ")"),
        best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Optimization or matrix-equation solver failure.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace zempc
