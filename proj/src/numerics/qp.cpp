#include "zempc/numerics/qp.hpp"

#include <cmath>
#include <limits>

#include "zempc/error.hpp"

namespace zempc {

void append_bounds(QpProblem& qp, const Vector& lo, const Vector& hi) {
  const auto n = qp.G.rows();
  std::vector<std::pair<Eigen::Index, double>> rows;  // +i: x_i >= v ; -(i+1): -x_i >= -v
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(lo[i])) ++count;
    if (std::isfinite(hi[i])) ++count;
  }
  const auto m0 = qp.CI.rows();
  Matrix CI(m0 + count, n);
  Vector ci(m0 + count);
  if (m0 > 0) {
    CI.topRows(m0) = qp.CI;
    ci.head(m0) = qp.ci;
  }
  Eigen::Index r = m0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(lo[i])) {
      CI.row(r).setZero();
      CI(r, i) = 1.0;
      ci[r++] = lo[i];
    }
    if (std::isfinite(hi[i])) {
      CI.row(r).setZero();
      CI(r, i) = -1.0;
      ci[r++] = -hi[i];
    }
  }
  qp.CI = std::move(CI);
  qp.ci = std::move(ci);
}

namespace {

// Active set: normals stored as columns of N, with kind (equality index or inequality index).
struct ActiveConstraint {
  bool equality;
  int index;
  Vector normal;
  double multiplier;
};

}  // namespace

QpResult solve_qp(const QpProblem& qp, double tol, int max_iterations) {
  const auto n = qp.G.rows();
  const auto me = qp.CE.rows();
  const auto mi = qp.CI.rows();
  if (qp.G.cols() != n || qp.g.size() != n || (me > 0 && qp.CE.cols() != n) || qp.ce.size() != me ||
      (mi > 0 && qp.CI.cols() != n) || qp.ci.size() != mi)
    throw ConfigError("QP dimensions are inconsistent");

  const Eigen::LLT<Matrix> llt(0.5 * (qp.G + qp.G.transpose()));
  if (llt.info() != Eigen::Success) throw SolverError("QP Hessian is not positive definite");
  const Matrix L = llt.matrixL();

  QpResult res;
  res.x = -llt.solve(qp.g);
  res.lambda_eq = Vector::Zero(me);
  res.lambda_ineq = Vector::Zero(mi);

  std::vector<ActiveConstraint> active;
  Matrix Q;                       // orthonormal basis of L^{-1} N
  Eigen::MatrixXd R;              // upper triangular factor
  auto refactor = [&]() {
    const int q = static_cast<int>(active.size());
    if (q == 0) {
      Q.resize(n, 0);
      R.resize(0, 0);
      return;
    }
    Matrix M(n, q);
    for (int k = 0; k < q; ++k) M.col(k) = L.triangularView<Eigen::Lower>().solve(active[k].normal);
    Eigen::HouseholderQR<Matrix> qr(M);
    Q = qr.householderQ() * Matrix::Identity(n, q);
    R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  };
  // z = G^{-1} (I - N N*) n_p, r = N* n_p
  auto directions = [&](const Vector& np, Vector& z, Vector& r) {
    const Vector w = L.triangularView<Eigen::Lower>().solve(np);
    const int q = static_cast<int>(active.size());
    Vector proj = w;
    if (q > 0) {
      const Vector qw = Q.transpose() * w;
      proj -= Q * qw;
      r = R.triangularView<Eigen::Upper>().solve(qw);
    } else {
      r.resize(0);
    }
    z = L.transpose().triangularView<Eigen::Upper>().solve(proj);
  };

  auto objective = [&](const Vector& x) { return 0.5 * x.dot(qp.G * x) + qp.g.dot(x); };

  // Adds constraint with normal np and rhs b (np^T x = b for equalities, >= b otherwise).
  // Returns false when the problem is infeasible.
  auto add_constraint = [&](bool equality, int index, Vector np, double b) -> bool {
    double s = np.dot(res.x) - b;
    if (equality && s > 0) {
      np = -np;
      b = -b;
      s = -s;
    }
    double u_new = 0.0;
    for (int guard = 0; guard < 2 * (static_cast<int>(n) + static_cast<int>(mi)) + 10; ++guard) {
      Vector z, r;
      directions(np, z, r);
      const double zn = z.dot(np);
      const bool full_step_possible = z.norm() > 1e-12 * std::max(1.0, np.norm()) && zn > 1e-14;
      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int k = 0; k < static_cast<int>(active.size()); ++k) {
        if (active[k].equality) continue;
        if (r[k] > 0) {
          const double t = active[k].multiplier / r[k];
          if (t < t1) {
            t1 = t;
            drop = k;
          }
        }
      }
      const double t2 = full_step_possible ? -s / zn : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return false;
      for (int k = 0; k < static_cast<int>(active.size()); ++k) active[k].multiplier -= t * r[k];
      u_new += t;
      if (full_step_possible) {
        res.x += t * z;
        s = np.dot(res.x) - b;
      }
      if (t2 <= t1) {
        active.push_back({equality, index, np, u_new});
        refactor();
        return true;
      }
      active.erase(active.begin() + drop);
      refactor();
    }
    return false;
  };

  refactor();
  for (Eigen::Index i = 0; i < me; ++i) {
    if (!add_constraint(true, static_cast<int>(i), qp.CE.row(i).transpose(), qp.ce[i])) {
      res.status = QpStatus::kInfeasible;
      res.objective = objective(res.x);
      return res;
    }
  }

  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    // most violated inequality, measured relative to its normal
    int p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < mi; ++i) {
      bool is_active = false;
      for (const auto& a : active)
        if (!a.equality && a.index == i) is_active = true;
      if (is_active) continue;
      const double nrm = std::max(1.0, qp.CI.row(i).norm());
      const double s = (qp.CI.row(i).dot(res.x) - qp.ci[i]) / nrm;
      if (s < -tol * std::max(1.0, std::abs(qp.ci[i]) / nrm) && s < worst) {
        worst = s;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) {
      res.status = QpStatus::kOptimal;
      break;
    }
    if (!add_constraint(false, p, qp.CI.row(p).transpose(), qp.ci[p])) {
      res.status = QpStatus::kInfeasible;
      break;
    }
  }
  if (res.iterations >= max_iterations) res.status = QpStatus::kMaxIterations;

  for (const auto& a : active) {
    if (a.equality)
      res.lambda_eq[a.index] = (a.normal.dot(qp.CE.row(a.index).transpose()) >= 0 ? 1.0 : -1.0) * a.multiplier;
    else {
      res.lambda_ineq[a.index] = a.multiplier;
      res.active.push_back(a.index);
    }
  }
  res.objective = objective(res.x);
  return res;
}

}  // namespace zempc
