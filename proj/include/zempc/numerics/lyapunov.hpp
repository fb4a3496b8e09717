#pragma once

#include "zempc/numerics/linalg.hpp"

namespace zempc {

/// Solves A P + P A^T + Q = 0 by Bartels-Stewart on the real Schur form.
/// A must be Hurwitz (checked first, DomainError otherwise) and Q symmetric.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

/// ||A P + P A^T + Q||_F.
double lyapunov_residual(const Matrix& A, const Matrix& P, const Matrix& Q);

}  // namespace zempc
