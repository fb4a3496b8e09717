#pragma once
// Dense SQP for small smooth NLPs:
//
//   min f(z)  s.t.  c(z) <= 0,  lower <= z <= upper
//
// Damped BFGS Hessian (or a caller-supplied Hessian model), Goldfarb-Idnani QP
// subproblems with elastic fallback, l1 merit line search.

#include <functional>
#include <optional>
#include <string>

#include "zempc/numerics/qp.hpp"

namespace zempc {

/// Evaluates f and c at z.
using NlpEvaluator = std::function<void(const Vector& z, double& f, Vector& c)>;

/// Fills grad f and the Jacobian of c at z, given the values already computed there.
using NlpDerivatives =
    std::function<void(const Vector& z, double f, const Vector& c, Vector& grad, Matrix& jacobian)>;

struct NlpProblem {
  int n = 0;
  int m = 0;
  NlpEvaluator evaluate;
  NlpDerivatives derivatives;  // optional; central differences of `evaluate` otherwise
  // Optional positive semidefinite Hessian model, queried right after `derivatives`
  // at the same point. Replaces the quasi-Newton update when set.
  std::function<Matrix(const Vector& z)> hessian;
  Vector lower;                // -inf allowed
  Vector upper;                // +inf allowed
  Vector initial_guess;

  void validate() const;
};

enum class SolveStatus { kConverged, kMaxIterations, kStalled, kFailed };
std::string to_string(SolveStatus s);

struct OcpSolution {
  Vector z;
  double objective = 0.0;
  Vector constraints;
  Vector multipliers;        // for c(z) <= 0, >= 0
  double kkt_residual = 0.0;  // recomputed at z
  double max_violation = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kFailed;
  Matrix hessian;  // final BFGS approximation, reusable as a warm start
};

struct SqpOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
  double fd_step = 1e-6;  // relative central-difference step when no derivatives are given
  double elastic_weight = 1e3;
  std::optional<Matrix> initial_hessian;
  double hessian_regularization = 1e-6;  // added to a callback Hessian
};

/// Central-difference gradient and Jacobian of an evaluator.
void finite_difference_derivatives(const NlpEvaluator& evaluate, const Vector& z, double step, Vector& grad,
                                   Matrix& jacobian, int m);

/// max(projected stationarity, constraint violation, complementarity) for the
/// given multipliers, with bound multipliers eliminated by projection.
double kkt_residual(const Vector& z, const Vector& grad, const Matrix& jacobian, const Vector& c,
                    const Vector& multipliers, const Vector& lower, const Vector& upper);

OcpSolution solve_nlp(const NlpProblem& problem, const SqpOptions& options = {});

}  // namespace zempc
