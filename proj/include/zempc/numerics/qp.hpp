#pragma once
// Dense strictly convex QP by the Goldfarb-Idnani dual active-set method:
//
//   min 1/2 x^T G x + g^T x   s.t.  CE x = ce,  CI x >= ci
//
// G must be symmetric positive definite.

#include <vector>

#include <Eigen/Dense>

namespace zempc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations };

struct QpProblem {
  Matrix G;
  Vector g;
  Matrix CE;  // me x n (may have zero rows)
  Vector ce;
  Matrix CI;  // mi x n
  Vector ci;
};

struct QpResult {
  QpStatus status = QpStatus::kInfeasible;
  Vector x;
  Vector lambda_eq;    // sign-free
  Vector lambda_ineq;  // >= 0
  double objective = 0.0;
  int iterations = 0;
  std::vector<int> active;  // active inequality indices
};

QpResult solve_qp(const QpProblem& qp, double feasibility_tolerance = 1e-10, int max_iterations = 1000);

/// Adds simple bounds lo <= x <= hi (infinite entries skipped) as inequality rows.
void append_bounds(QpProblem& qp, const Vector& lo, const Vector& hi);

}  // namespace zempc
