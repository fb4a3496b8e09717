#include "zempc/numerics/lmi.hpp"

#include <cmath>
#include <limits>

#include "zempc/error.hpp"

namespace zempc {
namespace {

// log det of F if F > 0, else nullopt-like NaN
double log_det_pd(const Matrix& F) {
  Eigen::LLT<Matrix> llt(F);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  const Matrix& L = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0)) return std::numeric_limits<double>::quiet_NaN();
    s += std::log(L(i, i));
  }
  return 2.0 * s;
}

double barrier_value(const Vector& c, double t, const std::vector<LmiBlock>& blocks, const Vector& theta) {
  double v = t * c.dot(theta);
  for (const auto& b : blocks) {
    const double ld = log_det_pd(b.value(theta));
    if (std::isnan(ld)) return std::numeric_limits<double>::infinity();
    v -= ld;
  }
  return v;
}

// Newton iterations on t c^T theta - sum log det F_k(theta). Returns Newton steps used.
int center(const Vector& c, double t, const std::vector<LmiBlock>& blocks, Vector& theta, int budget) {
  const auto nv = theta.size();
  int used = 0;
  for (; used < budget; ++used) {
    Vector grad = t * c;
    Matrix H = Matrix::Zero(nv, nv);
    for (const auto& b : blocks) {
      const Matrix F = b.value(theta);
      Eigen::LLT<Matrix> llt(F);
      const Matrix Finv = llt.solve(Matrix::Identity(b.size, b.size));
      grad -= b.adjoint(Finv);
      Vector e = Vector::Zero(nv);
      for (Eigen::Index j = 0; j < nv; ++j) {
        e[j] = 1.0;
        const Matrix Lj = b.linear(e);
        e[j] = 0.0;
        H.col(j) += b.adjoint(Finv * Lj * Finv);
      }
    }
    H = 0.5 * (H + H.transpose());
    Eigen::LDLT<Matrix> ldlt(H);
    Vector step = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      H += 1e-10 * (H.diagonal().cwiseAbs().maxCoeff() + 1.0) * Matrix::Identity(nv, nv);
      step = H.llt().solve(-grad);
      if (!step.allFinite()) throw SolverError("barrier Newton system is singular");
    }
    const double decrement2 = -grad.dot(step);
    if (decrement2 / 2.0 <= 1e-10) return used + 1;

    const double v0 = barrier_value(c, t, blocks, theta);
    double s = 1.0;
    bool moved = false;
    while (s > 1e-12) {
      const Vector trial = theta + s * step;
      const double v = barrier_value(c, t, blocks, trial);
      if (std::isfinite(v) && v <= v0 - 0.25 * s * decrement2) {
        theta = trial;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved) return used + 1;
  }
  return used;
}

}  // namespace

BarrierResult minimize_with_barrier(const Vector& c, const std::vector<LmiBlock>& blocks, Vector theta0,
                                    double gap_tolerance, int max_newton_iterations) {
  for (const auto& b : blocks)
    if (std::isnan(log_det_pd(b.value(theta0)))) throw SolverError("barrier start point is not strictly feasible");
  int total_dim = 0;
  for (const auto& b : blocks) total_dim += b.size;

  BarrierResult res;
  res.theta = std::move(theta0);
  double t = 1.0;
  const double mu = 10.0;
  while (res.newton_iterations < max_newton_iterations) {
    res.newton_iterations += center(c, t, blocks, res.theta, max_newton_iterations - res.newton_iterations);
    const double gap = total_dim / t;
    if (gap <= gap_tolerance * std::max(1.0, std::abs(c.dot(res.theta)))) {
      res.converged = true;
      break;
    }
    t *= mu;
  }
  return res;
}

Vector find_strictly_feasible(const std::vector<LmiBlock>& blocks, const Vector& theta0, double margin,
                              int max_newton_iterations) {
  // Phase I: min s  s.t.  F_k(theta) + s I > 0.
  double s0 = 0.0;
  for (const auto& b : blocks) s0 = std::max(s0, -min_symmetric_eigenvalue(b.value(theta0)));
  const auto nv = theta0.size();
  bool feasible = true;
  for (const auto& b : blocks)
    if (min_symmetric_eigenvalue(b.value(theta0)) < margin) feasible = false;
  if (feasible) return theta0;

  std::vector<LmiBlock> lifted;
  for (const auto& b : blocks) {
    LmiBlock l;
    l.size = b.size;
    l.value = [b, nv](const Vector& th) {
      return Matrix(b.value(th.head(nv)) + th[nv] * Matrix::Identity(b.size, b.size));
    };
    l.linear = [b, nv](const Vector& d) {
      return Matrix(b.linear(d.head(nv)) + d[nv] * Matrix::Identity(b.size, b.size));
    };
    l.adjoint = [b, nv](const Matrix& W) {
      Vector out(nv + 1);
      out.head(nv) = b.adjoint(W);
      out[nv] = W.trace();
      return out;
    };
    lifted.push_back(std::move(l));
  }
  Vector theta(nv + 1);
  theta << theta0, s0 + 1.0;
  Vector c = Vector::Zero(nv + 1);
  c[nv] = 1.0;

  auto done = [&](const Vector& th) {
    for (const auto& b : blocks)
      if (min_symmetric_eigenvalue(b.value(th.head(nv))) < margin) return false;
    return true;
  };
  int used = 0;
  double t = 1.0;
  while (used < max_newton_iterations) {
    used += center(c, t, lifted, theta, max_newton_iterations - used);
    if (done(theta)) return theta.head(nv);
    if (theta[nv] > 0 && 1.0 * (lifted.size()) / t < 1e-9) break;
    t *= 10.0;
  }
  throw SolverError("linear matrix inequalities are infeasible");
}

InvarianceSdpResult solve_invariance_sdp(const Matrix& A, const Matrix& B, double u_max, const SdpOptions& opt) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n || m < 1) throw ConfigError("SDP operands have inconsistent dimensions");
  if (!(u_max > 0)) throw DomainError("input bound must be positive");
  if (!(opt.trace_bound > 0)) throw ConfigError("trace bound must be positive");

  // theta = [upper triangle of P (row-major), Y (column-major m x n)]
  const int np = n * (n + 1) / 2;
  const int nv = np + m * n;
  std::vector<std::pair<int, int>> sym_index;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) sym_index.emplace_back(i, j);

  auto P_of = [=](const Vector& th) {
    Matrix P(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++k) P(i, j) = P(j, i) = th[k];
    return P;
  };
  auto Y_of = [=](const Vector& th) { return Matrix(Eigen::Map<const Matrix>(th.data() + np, m, n)); };
  auto sym_adjoint = [=](const Matrix& G) {  // d/dtheta of <P(theta), G>
    Vector out(np);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++k) out[k] = i == j ? G(i, i) : G(i, j) + G(j, i);
    return out;
  };
  auto pack = [=](const Vector& gp, const Matrix& gy) {
    Vector out(nv);
    out.head(np) = gp;
    out.tail(m * n) = Eigen::Map<const Vector>(gy.data(), m * n);
    return out;
  };

  const double delta = opt.strictness;
  LmiBlock lyap;
  lyap.size = n;
  lyap.linear = [=](const Vector& d) {
    const Matrix dP = P_of(d), dY = Y_of(d);
    const Matrix M = A * dP + B * dY;
    return Matrix(-(M + M.transpose()));
  };
  lyap.value = [=](const Vector& th) {
    const Matrix P = P_of(th), Y = Y_of(th);
    const Matrix M = A * P + B * Y;
    return Matrix(-(M + M.transpose()) - delta * Matrix::Identity(n, n));
  };
  lyap.adjoint = [=](const Matrix& W) {
    const Matrix Ws = 0.5 * (W + W.transpose());
    return pack(sym_adjoint(-(A.transpose() * Ws + Ws * A)), -2.0 * B.transpose() * Ws);
  };

  LmiBlock schur;
  schur.size = n + m;
  schur.linear = [=](const Vector& d) {
    Matrix F = Matrix::Zero(n + m, n + m);
    const Matrix dY = Y_of(d);
    F.topLeftCorner(n, n) = P_of(d);
    F.bottomLeftCorner(m, n) = dY;
    F.topRightCorner(n, m) = dY.transpose();
    return F;
  };
  schur.value = [=](const Vector& th) {
    Matrix F = Matrix::Zero(n + m, n + m);
    const Matrix Y = Y_of(th);
    F.topLeftCorner(n, n) = P_of(th);
    F.bottomLeftCorner(m, n) = Y;
    F.topRightCorner(n, m) = Y.transpose();
    F.bottomRightCorner(m, m) = u_max * u_max * Matrix::Identity(m, m);
    return F;
  };
  schur.adjoint = [=](const Matrix& W) {
    const Matrix Ws = 0.5 * (W + W.transpose());
    return pack(sym_adjoint(Ws.topLeftCorner(n, n)), 2.0 * Ws.bottomLeftCorner(m, n));
  };

  const double beta = opt.trace_bound;
  LmiBlock cap;
  cap.size = n;
  cap.linear = [=](const Vector& d) { return Matrix(-P_of(d)); };
  cap.value = [=](const Vector& th) { return Matrix(beta * Matrix::Identity(n, n) - P_of(th)); };
  cap.adjoint = [=](const Matrix& W) {
    const Matrix Ws = 0.5 * (W + W.transpose());
    return pack(sym_adjoint(-Ws), Matrix::Zero(m, n));
  };

  const std::vector<LmiBlock> blocks{lyap, schur, cap};

  Vector theta0 = Vector::Zero(nv);
  {
    int k = 0;
    const double p0 = std::min(1.0, 0.5 * beta);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++k)
        if (i == j) theta0[k] = p0;
  }
  const Vector start = find_strictly_feasible(blocks, theta0, 1e-10, opt.max_newton_iterations);

  Vector c = Vector::Zero(nv);
  {
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++k)
        if (i == j) c[k] = -1.0;
  }
  const BarrierResult br = minimize_with_barrier(c, blocks, start, opt.gap_tolerance, opt.max_newton_iterations);
  if (!br.converged) throw SolverError("invariance SDP did not converge after " + std::to_string(br.newton_iterations) + " Newton steps, trace " + std::to_string(P_of(br.theta).trace()));

  InvarianceSdpResult res;
  res.P = P_of(br.theta);
  res.Y = Y_of(br.theta);
  res.trace = res.P.trace();
  res.newton_iterations = br.newton_iterations;
  const Matrix M = A * res.P + B * res.Y;
  res.lyapunov_certificate = max_symmetric_eigenvalue(M + M.transpose());
  Matrix F2 = schur.value(br.theta);
  res.schur_certificate = min_symmetric_eigenvalue(F2);
  if (!(res.lyapunov_certificate <= -1e-9) || !(res.schur_certificate >= -1e-9))
    throw SolverError("invariance SDP solution failed its eigenvalue certificates");
  res.K = res.Y * res.P.inverse();
  return res;
}

}  // namespace zempc
