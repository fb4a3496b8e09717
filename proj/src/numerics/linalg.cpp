#include "zempc/numerics/linalg.hpp"

#include <cmath>

#include "zempc/error.hpp"

namespace zempc {

void LinearModel::validate() const {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || B.cols() < 1 || x_s.size() != n)
    throw ConfigError("linear model dimensions are inconsistent");
  if (!A.allFinite() || !B.allFinite() || !x_s.allFinite() || !std::isfinite(u_s))
    throw ConfigError("linear model has non-finite entries");
}

Ellipsoid::Ellipsoid(Vector center, Matrix M, double level)
    : center_(std::move(center)), M_(std::move(M)), level_(level) {
  const auto n = center_.size();
  if (M_.rows() != n || M_.cols() != n) throw ConfigError("ellipsoid shape does not match its center");
  if (!(level_ > 0) || !std::isfinite(level_)) throw ConfigError("ellipsoid level must be positive");
  if (!M_.allFinite()) throw ConfigError("ellipsoid shape has non-finite entries");
  const double asym = (M_ - M_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, M_.cwiseAbs().maxCoeff())) throw ConfigError("ellipsoid shape must be symmetric");
  M_ = 0.5 * (M_ + M_.transpose());
  if (min_symmetric_eigenvalue(M_) <= 0) throw ConfigError("ellipsoid shape must be positive definite");
}

double Ellipsoid::quadratic_form(const Vector& x) const {
  if (x.size() != center_.size()) throw ConfigError("point dimension does not match the ellipsoid");
  const Vector d = x - center_;
  return d.dot(M_ * d);
}

double max_real_eigenvalue(const Matrix& A) {
  if (A.rows() != A.cols()) throw ConfigError("matrix must be square");
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) throw SolverError("eigenvalue computation failed");
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& A, double margin) { return max_real_eigenvalue(A) < -margin; }

double min_symmetric_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("eigenvalue computation failed");
  return es.eigenvalues().minCoeff();
}

double max_symmetric_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw SolverError("eigenvalue computation failed");
  return es.eigenvalues().maxCoeff();
}

}  // namespace zempc
