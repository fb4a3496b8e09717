#pragma once
// Maximal-trace ellipsoidal control invariant set under an input bound:
//
//   max trace(P)  s.t.  A P + P A^T + B Y + Y^T B^T < 0,
//                       [[P, Y^T], [Y, u_max^2 I]] >= 0,   P <= beta I
//
// solved with a log-det barrier interior-point method. The set is
// {x : x^T P^{-1} x <= 1} with feedback K = Y P^{-1}.

#include <functional>
#include <vector>

#include "zempc/numerics/linalg.hpp"

namespace zempc {

struct SdpOptions {
  double trace_bound = 1e3;       // beta; keeps the problem bounded when the open loop is marginal
  double strictness = 1e-7;       // Lyapunov block is required to be <= -strictness * I
  double gap_tolerance = 1e-7;    // relative barrier gap
  int max_newton_iterations = 400;
};

struct InvarianceSdpResult {
  Matrix P;
  Matrix Y;
  Matrix K;
  double trace = 0.0;
  double lyapunov_certificate = 0.0;  // max eig(AP + PA^T + BY + Y^T B^T)
  double schur_certificate = 0.0;     // min eig([[P, Y^T], [Y, u_max^2 I]])
  int newton_iterations = 0;
};

/// Throws SolverError on infeasibility, non-convergence or failed certificates.
InvarianceSdpResult solve_invariance_sdp(const Matrix& A, const Matrix& B, double u_max, const SdpOptions& options = {});

/// Affine symmetric matrix function F(theta) = F0 + L(theta) for the barrier solver.
struct LmiBlock {
  int size = 0;
  std::function<Matrix(const Vector& theta)> value;
  std::function<Matrix(const Vector& dtheta)> linear;
  std::function<Vector(const Matrix& W)> adjoint;  // <L(e_i), W>
};

struct BarrierResult {
  Vector theta;
  int newton_iterations = 0;
  bool converged = false;
};

/// min c^T theta  s.t.  F_k(theta) > 0 for all blocks, starting from a strictly
/// feasible theta0.
BarrierResult minimize_with_barrier(const Vector& c, const std::vector<LmiBlock>& blocks, Vector theta0,
                                    double gap_tolerance, int max_newton_iterations);

/// Finds a strictly feasible point (all blocks >= margin * I) or throws SolverError.
Vector find_strictly_feasible(const std::vector<LmiBlock>& blocks, const Vector& theta0, double margin,
                              int max_newton_iterations);

}  // namespace zempc
