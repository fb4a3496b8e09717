#include "zempc/numerics/linearize.hpp"

#include <cmath>
#include <string>

#include "zempc/error.hpp"

namespace zempc {

LinearModel linearize(const RhsFunction& f, const Vector& x_s, double u_s) {
  const auto n = x_s.size();
  LinearModel lin;
  lin.A.resize(n, n);
  lin.B.resize(n, 1);
  lin.x_s = x_s;
  lin.u_s = u_s;

  Vector x = x_s, fp(n), fm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x_s[i]));
    x[i] = x_s[i] + h;
    f(x, u_s, fp);
    x[i] = x_s[i] - h;
    f(x, u_s, fm);
    x[i] = x_s[i];
    lin.A.col(i) = (fp - fm) / (2.0 * h);
    if (!lin.A.col(i).allFinite()) throw SolverError("non-finite Jacobian column for state " + std::to_string(i));
  }
  const double h = std::max(1e-6, 1e-6 * std::abs(u_s));
  f(x_s, u_s + h, fp);
  f(x_s, u_s - h, fm);
  lin.B.col(0) = (fp - fm) / (2.0 * h);
  if (!lin.B.allFinite()) throw SolverError("non-finite Jacobian column for the input");
  return lin;
}

}  // namespace zempc
