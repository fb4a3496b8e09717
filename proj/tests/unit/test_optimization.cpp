#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "zempc/error.hpp"
#include "zempc/numerics/qp.hpp"
#include "zempc/numerics/sqp.hpp"

using namespace zempc;
using zempc::testing::random_matrix;
using zempc::testing::ConvexProblem;
using zempc::testing::random_convex;
using zempc::testing::projected_gradient;
using zempc::testing::as_nlp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem box_qp(const ConvexProblem& p) {
  QpProblem qp;
  qp.G = p.G;
  qp.g = p.g;
  qp.CE.resize(0, p.g.size());
  qp.ce.resize(0);
  qp.CI.resize(0, p.g.size());
  qp.ci.resize(0);
  append_bounds(qp, p.lo, p.hi);
  return qp;
}

}  // namespace

TEST(Qp, InequalityExample) {
  // min 1/2 |x|^2 - x1 - x2  s.t.  x1 + x2 <= 1  ->  x = (1/2, 1/2), multiplier 1/2
  QpProblem qp;
  qp.G = Matrix::Identity(2, 2);
  qp.g = -Vector::Ones(2);
  qp.CE.resize(0, 2);
  qp.ce.resize(0);
  qp.CI = -Matrix::Ones(1, 2);
  qp.ci = -Vector::Ones(1);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x[0], 0.5, 1e-12);
  EXPECT_NEAR(r.x[1], 0.5, 1e-12);
  EXPECT_NEAR(r.lambda_ineq[0], 0.5, 1e-12);
  EXPECT_NEAR(r.objective, -0.75, 1e-12);
  ASSERT_EQ(r.active.size(), 1u);
}

TEST(Qp, EqualityExample) {
  // min |x|^2  s.t.  x1 + 2 x2 = 5  ->  x = (1, 2)
  QpProblem qp;
  qp.G = 2 * Matrix::Identity(2, 2);
  qp.g = Vector::Zero(2);
  qp.CE = Matrix(1, 2);
  qp.CE << 1, 2;
  qp.ce = Vector::Constant(1, 5.0);
  qp.CI.resize(0, 2);
  qp.ci.resize(0);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], 2.0, 1e-12);
  EXPECT_NEAR(std::abs(r.lambda_eq[0]), 2.0, 1e-12);
}

TEST(Qp, InfeasibleAndInvalid) {
  QpProblem qp;
  qp.G = Matrix::Identity(1, 1);
  qp.g = Vector::Zero(1);
  qp.CE.resize(0, 1);
  qp.ce.resize(0);
  qp.CI = Matrix(2, 1);
  qp.CI << 1, -1;
  qp.ci = Vector(2);
  qp.ci << 1, 0;  // x >= 1 and x <= 0
  EXPECT_EQ(solve_qp(qp).status, QpStatus::kInfeasible);
  qp.G(0, 0) = -1.0;
  EXPECT_THROW(solve_qp(qp), SolverError);
  qp.G = Matrix::Identity(2, 2);
  EXPECT_THROW(solve_qp(qp), ConfigError);
}

TEST(Qp, AppendBoundsSkipsInfinite) {
  QpProblem qp;
  qp.G = Matrix::Identity(3, 3);
  qp.g = Vector::Zero(3);
  qp.CE.resize(0, 3);
  qp.ce.resize(0);
  qp.CI.resize(0, 3);
  qp.ci.resize(0);
  Vector lo(3), hi(3);
  lo << 1.0, -kInf, -kInf;
  hi << kInf, -2.0, kInf;
  append_bounds(qp, lo, hi);
  EXPECT_EQ(qp.CI.rows(), 2);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::kOptimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-12);
  EXPECT_NEAR(r.x[1], -2.0, 1e-12);
  EXPECT_NEAR(r.x[2], 0.0, 1e-12);
}

TEST(Qp, MatchesProjectedGradientOnBoxes) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const ConvexProblem p = random_convex(rng, 2 + trial % 9, 0.0);
    const QpResult r = solve_qp(box_qp(p));
    ASSERT_EQ(r.status, QpStatus::kOptimal);
    EXPECT_LE((r.x - projected_gradient(p)).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_GE(r.lambda_ineq.minCoeff(), -1e-12);
  }
}

TEST(Qp, MatchesProjectedGradientAtDimensionTwenty) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const ConvexProblem p = random_convex(rng, 20, 0.0);
    const QpResult r = solve_qp(box_qp(p));
    ASSERT_EQ(r.status, QpStatus::kOptimal);
    EXPECT_LE((r.x - projected_gradient(p)).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(Sqp, ConvexBatteryMatchesOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const ConvexProblem p = random_convex(rng, 2 + trial % 7, 1.0);
    const Vector oracle = projected_gradient(p);
    for (bool exact : {true, false}) {
      const OcpSolution s = solve_nlp(as_nlp(p, exact), SqpOptions{1e-9, 200, 1e-6, 1e3, std::nullopt});
      ASSERT_EQ(s.status, SolveStatus::kConverged) << "trial " << trial << " exact " << exact;
      EXPECT_LE(s.kkt_residual, 1e-6);
      EXPECT_LE((s.z - oracle).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial << " exact " << exact;
    }
  }
}

TEST(Sqp, NonlinearConstraintExamples) {
  // min x + y  s.t.  x^2 + y^2 <= 2  ->  (-1, -1), multiplier 1/2
  NlpProblem nlp;
  nlp.n = 2;
  nlp.m = 1;
  nlp.evaluate = [](const Vector& z, double& f, Vector& c) {
    f = z[0] + z[1];
    c.resize(1);
    c[0] = z.squaredNorm() - 2.0;
  };
  nlp.lower = Vector::Constant(2, -kInf);
  nlp.upper = Vector::Constant(2, kInf);
  nlp.initial_guess = Vector::Zero(2);
  OcpSolution s = solve_nlp(nlp);
  ASSERT_EQ(s.status, SolveStatus::kConverged);
  EXPECT_NEAR(s.z[0], -1.0, 1e-5);
  EXPECT_NEAR(s.z[1], -1.0, 1e-5);
  EXPECT_NEAR(s.multipliers[0], 0.5, 1e-4);
  EXPECT_LE(s.max_violation, 1e-6);

  // min (x-2)^2 + (y-1)^2  s.t.  x + y <= 1, x >= 0, y >= 0  ->  (1, 0)
  nlp.evaluate = [](const Vector& z, double& f, Vector& c) {
    f = (z[0] - 2) * (z[0] - 2) + (z[1] - 1) * (z[1] - 1);
    c.resize(1);
    c[0] = z[0] + z[1] - 1.0;
  };
  nlp.lower = Vector::Zero(2);
  nlp.initial_guess = Vector::Constant(2, 0.3);
  s = solve_nlp(nlp);
  ASSERT_EQ(s.status, SolveStatus::kConverged);
  EXPECT_NEAR(s.z[0], 1.0, 1e-6);
  EXPECT_NEAR(s.z[1], 0.0, 1e-6);
}

TEST(Sqp, HessianCallbackIsUsed) {
  // Rosenbrock with its exact Gauss-Newton model as residual form
  NlpProblem nlp;
  nlp.n = 2;
  nlp.m = 0;
  nlp.evaluate = [](const Vector& z, double& f, Vector& c) {
    f = std::pow(1 - z[0], 2) + 100 * std::pow(z[1] - z[0] * z[0], 2);
    c.resize(0);
  };
  nlp.hessian = [](const Vector& z) {
    Matrix Jr(2, 2);  // residuals (1 - x, 10 (y - x^2))
    Jr << -1, 0, -20 * z[0], 10;
    return Matrix(2 * Jr.transpose() * Jr);
  };
  nlp.lower = Vector::Constant(2, -kInf);
  nlp.upper = Vector::Constant(2, kInf);
  nlp.initial_guess = Vector::Constant(2, -1.0);
  const OcpSolution s = solve_nlp(nlp, SqpOptions{1e-8, 200, 1e-6, 1e3, std::nullopt});
  ASSERT_EQ(s.status, SolveStatus::kConverged);
  EXPECT_NEAR(s.z[0], 1.0, 1e-5);
  EXPECT_NEAR(s.z[1], 1.0, 1e-5);
}

TEST(Sqp, NeverClaimsConvergenceAboveTolerance) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  int converged = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double a = d(rng), b = d(rng), r2 = 0.5 + std::abs(d(rng));
    NlpProblem nlp;
    nlp.n = 2;
    nlp.m = 1;
    // nonconvex objective on a disk
    nlp.evaluate = [a, b, r2](const Vector& z, double& f, Vector& c) {
      f = std::sin(3 * z[0]) * std::cos(2 * z[1]) + a * z[0] + b * z[1] * z[1];
      c.resize(1);
      c[0] = z.squaredNorm() - r2;
    };
    nlp.lower = Vector::Constant(2, -3.0);
    nlp.upper = Vector::Constant(2, 3.0);
    nlp.initial_guess = Vector(2);
    nlp.initial_guess << d(rng), d(rng);
    for (int max_it : {3, 100}) {
      const OcpSolution s = solve_nlp(nlp, SqpOptions{1e-6, max_it, 1e-6, 1e3, std::nullopt});
      if (s.status == SolveStatus::kConverged) {
        ++converged;
        EXPECT_LE(s.kkt_residual, 1e-5) << "trial " << trial;
        EXPECT_LE(s.max_violation, 1e-5);
      }
      EXPECT_LE(s.iterations, max_it);
    }
  }
  EXPECT_GT(converged, 20);
}

TEST(Sqp, KktResidualExamples) {
  // grad f = (1, 1), constraint x^2 + y^2 <= 2 at (-1, -1) with multiplier 1/2 is stationary
  Vector z(2), grad(2), c(1), mu(1);
  z << -1, -1;
  grad << 1, 1;
  Matrix J(1, 2);
  J << -2, -2;
  c << 0.0;
  mu << 0.5;
  const Vector lo = Vector::Constant(2, -kInf), hi = Vector::Constant(2, kInf);
  EXPECT_NEAR(kkt_residual(z, grad, J, c, mu, lo, hi), 0.0, 1e-15);
  mu << 0.25;
  EXPECT_NEAR(kkt_residual(z, grad, J, c, mu, lo, hi), 0.5, 1e-15);
  // active lower bound absorbs a positive gradient
  Vector z1 = Vector::Zero(1), g1 = Vector::Constant(1, 3.0);
  EXPECT_NEAR(kkt_residual(z1, g1, Matrix(0, 1), Vector(0), Vector(0), Vector::Zero(1), Vector::Ones(1)), 0.0,
              1e-15);
}

TEST(Sqp, FiniteDifferencesMatchAnalytic) {
  const NlpEvaluator ev = [](const Vector& z, double& f, Vector& c) {
    f = std::exp(z[0]) * z[1];
    c.resize(2);
    c << z[0] * z[1], std::sin(z[1]);
  };
  Vector z(2);
  z << 0.3, -1.2;
  Vector grad;
  Matrix J;
  finite_difference_derivatives(ev, z, 1e-6, grad, J, 2);
  EXPECT_NEAR(grad[0], std::exp(0.3) * -1.2, 1e-8);
  EXPECT_NEAR(grad[1], std::exp(0.3), 1e-8);
  EXPECT_NEAR(J(0, 0), -1.2, 1e-8);
  EXPECT_NEAR(J(0, 1), 0.3, 1e-8);
  EXPECT_NEAR(J(1, 0), 0.0, 1e-8);
  EXPECT_NEAR(J(1, 1), std::cos(-1.2), 1e-8);
}

TEST(Sqp, RejectsBadProblems) {
  NlpProblem nlp;
  nlp.n = 1;
  EXPECT_THROW(solve_nlp(nlp), ConfigError);
  nlp.evaluate = [](const Vector& z, double& f, Vector& c) {
    f = z[0];
    c.resize(0);
  };
  nlp.lower = Vector::Constant(1, 1.0);
  nlp.upper = Vector::Constant(1, 0.0);
  nlp.initial_guess = Vector::Zero(1);
  EXPECT_THROW(solve_nlp(nlp), ConfigError);
  EXPECT_EQ(to_string(SolveStatus::kConverged), "converged");
}
