#include "zempc/numerics/integrate.hpp"

#include <cmath>

#include "zempc/error.hpp"

namespace zempc {

double PiecewiseConstantInput::at(double t) const {
  if (values.empty()) throw ConfigError("piecewise-constant input has no values");
  if (t <= 0) return values.front();
  const auto k = static_cast<std::size_t>(std::floor(t / interval + 1e-9));
  return values[std::min(k, values.size() - 1)];
}

int step_count(double duration, double dt) {
  if (!(dt > 0) || !(duration >= 0)) throw ConfigError("integration step and span must be positive");
  const double steps = duration / dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
    throw ConfigError("integration step does not divide the time span");
  return static_cast<int>(rounded);
}

void Rk4Stepper::resize(int n) {
  if (k1_.size() == n) return;
  k1_.resize(n);
  k2_.resize(n);
  k3_.resize(n);
  k4_.resize(n);
  tmp_.resize(n);
}

int Rk4Stepper::advance(const RhsFunction& f, Eigen::Ref<Vector> x, double u, double duration, double dt,
                        const StepProjection& projection, double t_start) {
  resize(static_cast<int>(x.size()));
  const int steps = step_count(duration, dt);
  int projected = 0;
  for (int s = 0; s < steps; ++s) {
    f(x, u, k1_);
    tmp_ = x + 0.5 * dt * k1_;
    f(tmp_, u, k2_);
    tmp_ = x + 0.5 * dt * k2_;
    f(tmp_, u, k3_);
    tmp_ = x + dt * k3_;
    f(tmp_, u, k4_);
    x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    if (!x.allFinite()) throw IntegrationError("non-finite state", t_start + (s + 1) * dt);
    if (projection) projected += projection(x);
  }
  return projected;
}

Trajectory integrate(const RhsFunction& f, const Vector& x0, const PiecewiseConstantInput& u, double t0, double t1,
                     double dt, const StepProjection& projection) {
  if (!(t1 >= t0)) throw ConfigError("integration span must be ordered");
  const int steps = step_count(t1 - t0, dt);
  if (!x0.allFinite()) throw IntegrationError("non-finite initial state", t0);
  Trajectory traj;
  traj.time.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.time.push_back(t0);
  traj.states.push_back(x0);
  Rk4Stepper stepper(static_cast<int>(x0.size()));
  Vector x = x0;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * dt;
    traj.projections += stepper.advance(f, x, u.at(t - t0), dt, dt, projection, t);
    traj.time.push_back(t0 + (s + 1) * dt);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace zempc
