#pragma once

#include <Eigen/Dense>

namespace zempc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Jacobians of dx/dt = f(x, u) at (x_s, u_s).
struct LinearModel {
  Matrix A;
  Matrix B;  // n x 1
  Vector x_s;
  double u_s = 0.0;

  void validate() const;
};

/// {x : (x - center)^T M (x - center) <= level}.
class Ellipsoid {
 public:
  Ellipsoid() = default;
  Ellipsoid(Vector center, Matrix M, double level);

  /// (x - center)^T M (x - center).
  double quadratic_form(const Vector& x) const;
  bool contains(const Vector& x) const { return quadratic_form(x) <= level_; }

  const Vector& center() const { return center_; }
  const Matrix& shape() const { return M_; }
  double level() const { return level_; }
  int dimension() const { return static_cast<int>(center_.size()); }
  bool empty() const { return center_.size() == 0; }

 private:
  Vector center_;
  Matrix M_;
  double level_ = 0.0;
};

/// All eigenvalue real parts < -margin.
bool is_hurwitz(const Matrix& A, double margin = 1e-9);

double max_real_eigenvalue(const Matrix& A);

/// Smallest eigenvalue of the symmetric part of S.
double min_symmetric_eigenvalue(const Matrix& S);
double max_symmetric_eigenvalue(const Matrix& S);

}  // namespace zempc
