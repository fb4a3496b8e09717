#include "zempc/numerics/lyapunov.hpp"

#include <vector>

#include "zempc/error.hpp"

namespace zempc {
namespace {

// Diagonal block boundaries of an upper quasi-triangular matrix.
std::vector<std::pair<int, int>> schur_blocks(const Matrix& T) {
  std::vector<std::pair<int, int>> blocks;
  const int n = static_cast<int>(T.rows());
  for (int i = 0; i < n;) {
    const int size = (i + 1 < n && T(i + 1, i) != 0.0) ? 2 : 1;
    blocks.emplace_back(i, size);
    i += size;
  }
  return blocks;
}

// Solves T Y + Y S^T = R for Y (n x p), T upper quasi-triangular, S p x p with p <= 2.
Matrix solve_quasi_triangular_sylvester(const Matrix& T, const std::vector<std::pair<int, int>>& blocks,
                                        const Matrix& S, Matrix R) {
  const int p = static_cast<int>(S.rows());
  Matrix Y = Matrix::Zero(T.rows(), p);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    const auto [i, q] = *it;
    const int tail = static_cast<int>(T.rows()) - (i + q);
    Matrix rhs = R.middleRows(i, q);
    if (tail > 0) rhs -= T.block(i, i + q, q, tail) * Y.bottomRows(tail);
    // T_ii Y_i + Y_i S^T = rhs, vectorized column-major: (I (x) T_ii + S (x) I) vec(Y_i)
    const Matrix Tii = T.block(i, i, q, q);
    Matrix K = Matrix::Zero(q * p, q * p);
    for (int a = 0; a < p; ++a) {
      K.block(a * q, a * q, q, q) += Tii;
      for (int b = 0; b < p; ++b) K.block(a * q, b * q, q, q) += S(a, b) * Matrix::Identity(q, q);
    }
    const Vector vec_rhs = Eigen::Map<const Vector>(rhs.data(), q * p);
    const Vector sol = K.fullPivLu().solve(vec_rhs);
    Y.middleRows(i, q) = Eigen::Map<const Matrix>(sol.data(), q, p);
  }
  return Y;
}

}  // namespace

double lyapunov_residual(const Matrix& A, const Matrix& P, const Matrix& Q) {
  return (A * P + P * A.transpose() + Q).norm();
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  const auto n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) throw ConfigError("Lyapunov operands must be square and conformant");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()))
    throw DomainError("Q must be symmetric");
  if (!is_hurwitz(A)) throw DomainError("A is not Hurwitz; the Lyapunov equation has no positive definite solution");

  Eigen::RealSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) throw SolverError("real Schur decomposition failed");
  const Matrix& T = schur.matrixT();
  const Matrix& U = schur.matrixU();
  const Matrix C = -(U.transpose() * Q * U);

  // T X + X T^T = C, columns solved right to left.
  const auto blocks = schur_blocks(T);
  Matrix X = Matrix::Zero(n, n);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    const auto [j, p] = *it;
    const int tail = static_cast<int>(n) - (j + p);
    Matrix R = C.middleCols(j, p);
    if (tail > 0) R -= X.rightCols(tail) * T.block(j, j + p, p, tail).transpose();
    X.middleCols(j, p) = solve_quasi_triangular_sylvester(T, blocks, T.block(j, j, p, p), R);
  }
  Matrix P = U * X * U.transpose();
  return 0.5 * (P + P.transpose());
}

}  // namespace zempc
