#pragma once
// Fixed-step classical Runge-Kutta integration with piecewise-constant input.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace zempc {

using Vector = Eigen::VectorXd;

/// dx = f(x, u).
using RhsFunction = std::function<void(const Eigen::Ref<const Vector>& x, double u, Eigen::Ref<Vector> dx)>;

/// Optional projection applied after every step; returns how many entries it changed.
using StepProjection = std::function<int(Eigen::Ref<Vector> x)>;

/// u(t) = values[k] on [k*interval, (k+1)*interval); the last value is held.
struct PiecewiseConstantInput {
  std::vector<double> values;
  double interval = 1.0;

  double at(double t) const;
};

struct Trajectory {
  std::vector<double> time;
  std::vector<Vector> states;  // states.front() = x0, states.back() = x(t_end)
  int projections = 0;
};

/// RK4 over [t0, t1] recording every step. (t1 - t0) must be a multiple of dt
/// (to 1e-9 relative). Throws IntegrationError on non-finite states.
Trajectory integrate(const RhsFunction& f, const Vector& x0, const PiecewiseConstantInput& u, double t0, double t1,
                     double dt, const StepProjection& projection = nullptr);

/// Reusable RK4 stepper for constant input without storing the trajectory.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(int n = 0) { resize(n); }
  void resize(int n);

  /// Advances x in place by `duration` with step dt and constant u.
  /// Returns the number of projected entries.
  int advance(const RhsFunction& f, Eigen::Ref<Vector> x, double u, double duration, double dt,
              const StepProjection& projection = nullptr, double t_start = 0.0);

 private:
  Vector k1_, k2_, k3_, k4_, tmp_;
};

/// Number of dt steps in `duration`; throws ConfigError if dt does not divide it.
int step_count(double duration, double dt);

}  // namespace zempc
