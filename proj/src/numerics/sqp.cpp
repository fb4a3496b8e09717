#include "zempc/numerics/sqp.hpp"

#include <cmath>
#include <limits>

#include "zempc/error.hpp"

namespace zempc {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max-iter";
    case SolveStatus::kStalled:
      return "stalled";
    case SolveStatus::kFailed:
      return "failed";
  }
  return "unknown";
}

void NlpProblem::validate() const {
  if (n < 1 || m < 0) throw ConfigError("NLP dimensions must be positive");
  if (!evaluate) throw ConfigError("NLP evaluator missing");
  if (lower.size() != n || upper.size() != n || initial_guess.size() != n)
    throw ConfigError("NLP bound or initial guess size mismatch");
  for (int i = 0; i < n; ++i)
    if (!(lower[i] <= upper[i])) throw ConfigError("NLP bounds are inverted");
}

void finite_difference_derivatives(const NlpEvaluator& evaluate, const Vector& z, double step, Vector& grad,
                                   Matrix& jacobian, int m) {
  const auto n = z.size();
  grad.resize(n);
  jacobian.resize(m, n);
  Vector zp = z, cp(m), cm(m);
  double fp = 0, fm = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(z[j]));
    zp[j] = z[j] + h;
    evaluate(zp, fp, cp);
    zp[j] = z[j] - h;
    evaluate(zp, fm, cm);
    zp[j] = z[j];
    grad[j] = (fp - fm) / (2 * h);
    if (m > 0) jacobian.col(j) = (cp - cm) / (2 * h);
  }
}

namespace {

double violation(const Vector& c) { return c.size() ? c.cwiseMax(0.0).maxCoeff() : 0.0; }
double violation_l1(const Vector& c) { return c.size() ? c.cwiseMax(0.0).sum() : 0.0; }

bool at_lower(double z, double lo) { return std::isfinite(lo) && z <= lo + 1e-9 * std::max(1.0, std::abs(lo)); }
bool at_upper(double z, double hi) { return std::isfinite(hi) && z >= hi - 1e-9 * std::max(1.0, std::abs(hi)); }

struct Subproblem {
  Vector d;
  Vector multipliers;
  bool elastic = false;
  bool ok = false;
};

// min 1/2 d^T B d + grad^T d  s.t.  J d + c <= 0,  lo - z <= d <= hi - z
Subproblem solve_subproblem(const Matrix& B, const Vector& grad, const Matrix& J, const Vector& c,
                            const Vector& z, const Vector& lo, const Vector& hi, double elastic_weight) {
  const auto n = z.size();
  const auto m = c.size();
  Subproblem out;
  {
    QpProblem qp{B, grad, Matrix(0, n), Vector(0), -J, c};
    append_bounds(qp, lo - z, hi - z);
    const QpResult r = solve_qp(qp);
    if (r.status == QpStatus::kOptimal) {
      out.d = r.x;
      out.multipliers = r.lambda_ineq.head(m);
      out.ok = true;
      return out;
    }
  }
  // Elastic mode: J d + c <= t, t >= 0, penalized linearly.
  const auto ne = n + m;
  QpProblem qp;
  qp.G = Matrix::Zero(ne, ne);
  qp.G.topLeftCorner(n, n) = B;
  qp.G.bottomRightCorner(m, m) = 1e-8 * elastic_weight * Matrix::Identity(m, m);
  qp.g.resize(ne);
  qp.g << grad, Vector::Constant(m, elastic_weight);
  qp.CE.resize(0, ne);
  qp.ce.resize(0);
  qp.CI.resize(m, ne);
  qp.CI << -J, Matrix::Identity(m, m);
  qp.ci = c;
  Vector lo_e(ne), hi_e(ne);
  lo_e << lo - z, Vector::Zero(m);
  hi_e << hi - z, Vector::Constant(m, std::numeric_limits<double>::infinity());
  append_bounds(qp, lo_e, hi_e);
  const QpResult r = solve_qp(qp);
  if (r.status != QpStatus::kOptimal) return out;
  out.d = r.x.head(n);
  out.multipliers = r.lambda_ineq.head(m);
  out.elastic = true;
  out.ok = true;
  return out;
}

}  // namespace

double kkt_residual(const Vector& z, const Vector& grad, const Matrix& jacobian, const Vector& c,
                    const Vector& multipliers, const Vector& lower, const Vector& upper) {
  Vector g = grad;
  if (c.size()) g += jacobian.transpose() * multipliers;
  double stationarity = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double r = std::abs(g[i]);
    if (at_lower(z[i], lower[i])) r = std::max(0.0, -g[i]);
    if (at_upper(z[i], upper[i])) r = std::max(0.0, g[i]);
    if (at_lower(z[i], lower[i]) && at_upper(z[i], upper[i])) r = 0.0;
    stationarity = std::max(stationarity, r);
  }
  double complementarity = 0.0, dual_infeasibility = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    complementarity = std::max(complementarity, std::abs(multipliers[i] * c[i]));
    dual_infeasibility = std::max(dual_infeasibility, -multipliers[i]);
  }
  return std::max({stationarity, violation(c), complementarity, dual_infeasibility});
}

OcpSolution solve_nlp(const NlpProblem& problem, const SqpOptions& options) {
  problem.validate();
  const int n = problem.n, m = problem.m;
  const Vector& lo = problem.lower;
  const Vector& hi = problem.upper;

  auto derivatives = [&](const Vector& z, double f, const Vector& c, Vector& g, Matrix& J) {
    if (problem.derivatives)
      problem.derivatives(z, f, c, g, J);
    else
      finite_difference_derivatives(problem.evaluate, z, options.fd_step, g, J, m);
    if (g.size() != n || J.rows() != m || J.cols() != n) throw SolverError("derivative callback size mismatch");
    if (!g.allFinite() || !J.allFinite()) throw SolverError("non-finite derivatives");
  };

  OcpSolution sol;
  Vector z = problem.initial_guess.cwiseMax(lo).cwiseMin(hi);
  double f = 0;
  Vector c(m);
  problem.evaluate(z, f, c);
  if (!std::isfinite(f) || !c.allFinite()) throw SolverError("non-finite objective at the initial guess");
  Vector g;
  Matrix J;
  derivatives(z, f, c, g, J);

  auto model_hessian = [&](const Vector& at) {
    Matrix H = problem.hessian(at);
    if (H.rows() != n || H.cols() != n || !H.allFinite()) throw SolverError("Hessian callback returned a bad matrix");
    H = 0.5 * (H + H.transpose());
    H.diagonal().array() += std::max(options.hessian_regularization, 1e-10 * H.diagonal().cwiseAbs().maxCoeff());
    return H;
  };

  Matrix B = Matrix::Identity(n, n);
  if (problem.hessian)
    B = model_hessian(z);
  else if (options.initial_hessian && options.initial_hessian->rows() == n && options.initial_hessian->cols() == n)
    B = *options.initial_hessian;

  Vector lambda = Vector::Zero(m);
  double rho = 1.0;
  double kkt = std::numeric_limits<double>::infinity();
  sol.status = SolveStatus::kMaxIterations;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Subproblem sp = solve_subproblem(B, g, J, c, z, lo, hi, options.elastic_weight);
    if (!sp.ok) {
      B = Matrix::Identity(n, n);
      sp = solve_subproblem(B, g, J, c, z, lo, hi, options.elastic_weight);
      if (!sp.ok) {
        sol.status = SolveStatus::kFailed;
        break;
      }
    }
    kkt = kkt_residual(z, g, J, c, sp.multipliers, lo, hi);
    lambda = sp.multipliers;
    const double step_norm = sp.d.cwiseAbs().maxCoeff();
    if (kkt <= options.tolerance && !sp.elastic) {
      sol.status = SolveStatus::kConverged;
      break;
    }

    // l1 merit
    rho = std::max(rho, 1.1 * (sp.multipliers.size() ? sp.multipliers.cwiseAbs().maxCoeff() : 0.0) + 1e-3);
    const double merit0 = f + rho * violation_l1(c);
    const double slope = g.dot(sp.d) - rho * violation_l1(c);
    double alpha = 1.0;
    Vector z_new;
    double f_new = 0;
    Vector c_new(m);
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = (z + alpha * sp.d).cwiseMax(lo).cwiseMin(hi);
      problem.evaluate(z_new, f_new, c_new);
      if (std::isfinite(f_new) && c_new.allFinite()) {
        const double merit = f_new + rho * violation_l1(c_new);
        if (merit <= merit0 + 1e-4 * alpha * std::min(slope, 0.0)) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (step_norm < 1e-12) {
        sol.status = SolveStatus::kStalled;
        break;
      }
      // Curvature model is poor; restart it before giving up.
      if (!problem.hessian && !(B - Matrix::Identity(n, n)).isZero(0.0)) {
        B = Matrix::Identity(n, n);
        continue;
      }
      sol.status = SolveStatus::kStalled;
      break;
    }

    Vector g_new;
    Matrix J_new;
    derivatives(z_new, f_new, c_new, g_new, J_new);

    if (problem.hessian) {
      B = model_hessian(z_new);
      z = z_new;
      f = f_new;
      c = c_new;
      g = g_new;
      J = J_new;
      continue;
    }

    // Powell-damped BFGS on the Lagrangian gradient.
    const Vector s = z_new - z;
    Vector y = g_new - g;
    if (m > 0) y += (J_new - J).transpose() * lambda;
    const Vector Bs = B * s;
    const double sBs = s.dot(Bs);
    const double sy = s.dot(y);
    if (sBs > 1e-16) {
      const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
      const Vector r = theta * y + (1 - theta) * Bs;
      B += r * r.transpose() / s.dot(r) - Bs * Bs.transpose() / sBs;
      B = 0.5 * (B + B.transpose());
    }

    z = z_new;
    f = f_new;
    c = c_new;
    g = g_new;
    J = J_new;
  }

  // Residual recomputed at the returned point with fresh multipliers.
  const Subproblem final_sp = solve_subproblem(B, g, J, c, z, lo, hi, options.elastic_weight);
  sol.z = z;
  sol.objective = f;
  sol.constraints = c;
  sol.multipliers = final_sp.ok ? final_sp.multipliers : lambda;
  sol.kkt_residual = kkt_residual(z, g, J, c, sol.multipliers, lo, hi);
  sol.max_violation = violation(c);
  sol.iterations = it;
  sol.hessian = B;
  if (sol.status == SolveStatus::kConverged && sol.kkt_residual > 10 * options.tolerance)
    sol.status = SolveStatus::kMaxIterations;
  return sol;
}

}  // namespace zempc
