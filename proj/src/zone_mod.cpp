#include "zempc/zone_mod.hpp"

#include <cmath>

#include "zempc/error.hpp"
#include "zempc/numerics/linearize.hpp"
#include "zempc/numerics/lyapunov.hpp"

namespace zempc {

std::string to_string(SetPath p) { return p == SetPath::kLyapunov ? "lyapunov" : "sdp"; }

std::string to_string(ProjectionMode p) { return p == ProjectionMode::kEquilibrium ? "equilibrium" : "full"; }

ProjectionMode projection_mode_from_string(const std::string& s) {
  if (s == "equilibrium") return ProjectionMode::kEquilibrium;
  if (s == "full") return ProjectionMode::kFullSupport;
  throw ConfigError("unknown projection mode '" + s + "'");
}

void ZoneModParams::validate() const {
  if (!(epsilon >= 0)) throw ConfigError("epsilon must be non-negative");
  if (n_max < 1) throw ConfigError("n_max must be at least 1");
  if (!(alpha > 0)) throw ConfigError("alpha must be positive");
  if (!(u_max > 0)) throw ConfigError("u_max must be positive");
  // (1 + r) must move a negative cost toward zero, or leave it unchanged
  if (!(r <= 0.0 && r > -1.0)) throw ConfigError("relaxation rate must lie in (-1, 0]");
  if (!(input_lower > 0 && input_lower < input_upper)) throw ConfigError("invalid steady-state input range");
}

double relax_cost(double cost, double r) { return (1.0 + r) * cost; }

SteadyStateTarget optimal_ss_cost(const ZoneSpec& zone, const AbsorberModel& model, const Scaling& scaling,
                                  const ZoneModParams& params) {
  zone.validate();
  const double lo = scaling.unscale_input(params.input_lower);
  const double hi = scaling.unscale_input(params.input_upper);
  const Vector x_hi = steady_state(model, hi);
  const double y_max = model.efficiency(x_hi);
  const double y_min = model.efficiency(steady_state(model, lo, x_hi));
  if (y_max < zone.lower || y_min > zone.upper)
    throw DomainError("zone is unreachable at steady state for admissible inputs");
  // highest reachable y in the zone
  const double target = std::min(zone.upper, y_max);
  if (target == y_max) return {-y_max, x_hi, hi};
  const SteadyStatePoint p = steady_state_for_efficiency(model, target, lo, hi);
  return {-p.efficiency, p.state, p.solvent_flow};
}

SteadyStateTarget crss(double relaxed_cost, const AbsorberModel& model, const Scaling& scaling,
                       const ZoneModParams& params) {
  const double lo = scaling.unscale_input(params.input_lower);
  const double hi = scaling.unscale_input(params.input_upper);
  const SteadyStatePoint p = steady_state_for_efficiency(model, -relaxed_cost, lo, hi);
  return {-p.efficiency, p.state, p.solvent_flow};
}

LinearModel linearize_scaled(const AbsorberModel& model, const Scaling& scaling, const Vector& x_s, double u_s) {
  const Vector& xs = scaling.state_scale();
  const double us = scaling.input_scale();
  const RhsFunction f = [&](const Eigen::Ref<const Vector>& x_hat, double u_hat, Eigen::Ref<Vector> dx) {
    const Vector x = x_hat.cwiseProduct(xs);
    model.rhs(x, u_hat * us, dx);
    dx.array() /= xs.array();
  };
  return linearize(f, scaling.scale(x_s), scaling.scale_input(u_s));
}

Vector output_gradient(const AbsorberModel& model, const Scaling& scaling, const Vector& x_s) {
  // efficiency is affine in the state, so one-sided differences are exact up to rounding
  const Vector x_hat = scaling.scale(x_s);
  const double y0 = model.efficiency(x_s);
  Vector g(x_hat.size());
  Vector probe = x_hat;
  for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x_hat[i]));
    probe[i] = x_hat[i] + h;
    g[i] = (model.efficiency(scaling.unscale(probe)) - y0) / h;
    probe[i] = x_hat[i];
  }
  return g;
}

std::pair<double, double> project_to_output(const Ellipsoid& set, const Vector& g, double y_s) {
  if (g.size() != set.dimension()) throw ConfigError("gradient dimension does not match the set");
  const Eigen::LLT<Matrix> llt(set.shape());
  if (llt.info() != Eigen::Success) throw DomainError("ellipsoid shape is not positive definite");
  const double w = std::sqrt(set.level() * g.dot(llt.solve(g)));
  return {y_s - w, y_s + w};
}

std::pair<double, double> project_equilibria(const Ellipsoid& set, const LinearModel& lin, const Vector& g,
                                             double y_s, double u_max) {
  const Vector d = lin.A.partialPivLu().solve(lin.B.col(0));  // equilibria: x = -d du
  if (!d.allFinite()) throw DomainError("linearization is singular; equilibrium projection undefined");
  const double dMd = d.dot(set.shape() * d);
  const double du = std::min(std::sqrt(set.level() / dMd), u_max);
  const double w = std::abs(g.dot(d)) * du;
  return {y_s - w, y_s + w};
}

bool stop_criterion(double y_lo, double y_hi, double epsilon, const ZoneSpec& zone) {
  return y_lo - epsilon >= zone.lower && y_hi + epsilon <= zone.upper;
}

namespace {

struct SetResult {
  Ellipsoid set;
  SetPath path;
  double y_lo, y_hi;
};

SetResult build_set(const SteadyStateTarget& ss, const ZoneModParams& params, const AbsorberModel& model,
                    const Scaling& scaling) {
  const LinearModel lin = linearize_scaled(model, scaling, ss.x_s, ss.u_s);
  const Vector g = output_gradient(model, scaling, ss.x_s);
  const double y_s = -ss.cost;
  const Vector center = scaling.scale(ss.x_s);
  const auto n = lin.A.rows();

  if (is_hurwitz(lin.A)) {
    // V = x^T P x decreases along dx/dt = A x when A^T P + P A + I = 0
    const Matrix P = solve_lyapunov(lin.A.transpose(), Matrix::Identity(n, n));
    double level = params.alpha;
    const Vector d = lin.A.partialPivLu().solve(lin.B.col(0));
    const double dPd = d.dot(P * d);
    if (dPd > 0) level = std::min(level, params.u_max * params.u_max * dPd);
    Ellipsoid set(center, P, level);
    const auto [lo, hi] = params.projection == ProjectionMode::kEquilibrium
                              ? project_equilibria(set, lin, g, y_s, params.u_max)
                              : project_to_output(set, g, y_s);
    return {std::move(set), SetPath::kLyapunov, lo, hi};
  }
  const InvarianceSdpResult sdp = solve_invariance_sdp(lin.A, lin.B, params.u_max, params.sdp);
  Ellipsoid set(center, sdp.P.inverse(), 1.0);
  const auto [lo, hi] = project_to_output(set, g, y_s);
  return {std::move(set), SetPath::kSdp, lo, hi};
}

}  // namespace

ModifiedZone modify_zone(const ZoneSpec& zone, const ZoneModParams& params, const AbsorberModel& model,
                         const Scaling& scaling) {
  zone.validate();
  params.validate();
  ModifiedZone out;
  const SteadyStateTarget best = optimal_ss_cost(zone, model, scaling, params);
  out.optimal_cost = best.cost;
  double cost = best.cost;
  int sdp_failures = 0;

  for (int i = 1; i <= params.n_max; ++i) {
    out.iterations = i;
    cost = relax_cost(cost, params.r);
    out.relaxed_cost = cost;
    ZoneModIteration it;
    it.iteration = i;
    it.relaxed_cost = cost;

    if (!(-cost > zone.lower && -cost < zone.upper)) {
      it.note = "relaxed target left the zone";
      out.log.push_back(it);
      out.diagnostics = "iteration " + std::to_string(i) + ": relaxed target " + std::to_string(-cost) +
                        " is no longer strictly inside the zone";
      return out;
    }
    SteadyStateTarget ss;
    try {
      ss = crss(cost, model, scaling, params);
    } catch (const Error& e) {
      it.note = e.what();
      out.log.push_back(it);
      out.diagnostics = "iteration " + std::to_string(i) + ": cost-relaxed steady state failed: " + e.what();
      return out;
    }

    try {
      SetResult sr = build_set(ss, params, model, scaling);
      sdp_failures = 0;
      it.path = sr.path;
      it.level = sr.set.level();
      it.y_lo = sr.y_lo;
      it.y_hi = sr.y_hi;
      it.accepted = stop_criterion(sr.y_lo, sr.y_hi, params.epsilon, zone);
      out.log.push_back(it);
      if (it.accepted) {
        out.ellipsoid = std::move(sr.set);
        out.y_lo = sr.y_lo;
        out.y_hi = sr.y_hi;
        out.x_s = ss.x_s;
        out.u_s = ss.u_s;
        out.path = sr.path;
        return out;
      }
    } catch (const SolverError& e) {
      it.path = SetPath::kSdp;
      it.note = e.what();
      out.log.push_back(it);
      if (++sdp_failures >= 2) {
        out.diagnostics = "iteration " + std::to_string(i) + ": invariant set computation failed twice: " + e.what();
        return out;
      }
    }
  }
  out.diagnostics = "no admissible set within " + std::to_string(params.n_max) + " iterations";
  return out;
}

ModifiedZone invariant_set_at(double y_target, const ZoneSpec& zone, const ZoneModParams& params,
                              const AbsorberModel& model, const Scaling& scaling) {
  zone.validate();
  params.validate();
  const SteadyStateTarget ss = crss(-y_target, model, scaling, params);
  SetResult sr = build_set(ss, params, model, scaling);
  ModifiedZone out;
  out.iterations = 1;
  out.relaxed_cost = ss.cost;
  out.optimal_cost = ss.cost;
  out.x_s = ss.x_s;
  out.u_s = ss.u_s;
  out.path = sr.path;
  out.y_lo = sr.y_lo;
  out.y_hi = sr.y_hi;
  ZoneModIteration it{1, ss.cost, sr.path, sr.set.level(), sr.y_lo, sr.y_hi,
                      stop_criterion(sr.y_lo, sr.y_hi, params.epsilon, zone), "fixed center"};
  out.log.push_back(it);
  out.ellipsoid = std::move(sr.set);
  return out;
}

}  // namespace zempc
