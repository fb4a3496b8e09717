#include "zempc/zone_empc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zempc/error.hpp"
#include "zempc/numerics/integrate.hpp"

namespace zempc {

void ZoneSpec::validate() const {
  if (!(lower >= 0.0 && lower <= upper && upper <= 1.0)) throw ConfigError("zone must satisfy 0 <= lower <= upper <= 1");
  if (!(c1 >= 0.0) || !std::isfinite(c1)) throw ConfigError("zone weight c1 must be non-negative");
}

double zone_distance(double y, const ZoneSpec& zone) {
  if (y > zone.upper) return y - zone.upper;
  if (y < zone.lower) return zone.lower - y;
  return 0.0;
}

double zone_penalty(double y, const ZoneSpec& zone) {
  const double d = zone_distance(y, zone);
  return zone.c1 * d * d;
}

double stage_cost(double y, const ZoneSpec& zone) { return -y + zone_penalty(y, zone); }

namespace {

double stage_cost_derivative(double y, const ZoneSpec& zone) {
  double d = 0.0;
  if (y > zone.upper) d = y - zone.upper;
  if (y < zone.lower) d = y - zone.lower;
  return -1.0 + 2.0 * zone.c1 * d;
}

// Absent species decay toward zero by pure advection and would otherwise end
// up as subnormals, which are very slow on common hardware.
constexpr double kNegligibleConcentration = 1e-150;

int flush_negligible(Eigen::Ref<Vector> s) {
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (std::abs(s[i]) < kNegligibleConcentration) s[i] = 0.0;
  return 0;
}

}  // namespace

void ControllerParams::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(sampling_time > 0) || !(dt > 0)) throw ConfigError("sampling time and step must be positive");
  step_count(sampling_time, dt);
  if (!(u_min > 0) || !(u_min < u_max)) throw ConfigError("input bounds must satisfy 0 < u_min < u_max");
  if (!(y_min < y_max)) throw ConfigError("output bounds are empty");
  if (!(fd_step > 0)) throw ConfigError("finite-difference step must be positive");
}

ZoneController::ZoneController(AbsorberModel model, Scaling scaling, ZoneSpec zone, ControllerParams params)
    : model_(std::move(model)),
      scaling_(std::move(scaling)),
      zone_(zone),
      params_(std::move(params)),
      kind_(ControllerKind::kNominal) {
  zone_.validate();
  params_.validate();
  if (scaling_.state_scale().size() != model_.state_size()) throw ConfigError("scaling does not match the model");
}

ZoneController::ZoneController(AbsorberModel model, Scaling scaling, ZoneSpec zone, ControllerParams params,
                               Ellipsoid set)
    : ZoneController(std::move(model), std::move(scaling), zone, std::move(params)) {
  if (set.dimension() != model_.state_size()) throw ConfigError("tracked set dimension does not match the model");
  kind_ = ControllerKind::kRobust;
  set_center_scaled_ = set.center();
  set_ = std::move(set);
}

void ZoneController::reset_warm_start() {
  last_z_.resize(0);
  last_hessian_.reset();
}

void ZoneController::simulate_from(const Vector& x_start, const Vector& v, int first,
                                   std::vector<Vector>& states) const {
  const int N = params_.horizon;
  if (observer_) observer_(model_.boundary().gas.volumetric_flow);
  const RhsFunction f = [this](const Eigen::Ref<const Vector>& s, double u, Eigen::Ref<Vector> d) {
    model_.rhs(s, u, d);
  };
  Rk4Stepper stepper(model_.state_size());
  states.resize(N + 1);
  states[first] = x_start;
  Vector x = x_start;
  for (int k = first; k < N; ++k) {
    stepper.advance(f, x, scaling_.unscale_input(v[k]), params_.sampling_time, params_.dt, flush_negligible,
                    k * params_.sampling_time);
    states[k + 1] = x;
  }
}

void ZoneController::predict(const Vector& x, const Vector& v, Vector& y, std::vector<Vector>& states) const {
  if (v.size() != params_.horizon) throw ConfigError("input sequence length must equal the horizon");
  simulate_from(x, v, 0, states);
  y.resize(params_.horizon);
  for (int k = 0; k < params_.horizon; ++k) y[k] = model_.efficiency(states[k + 1]);
}

Vector ZoneController::shifted_plan() const {
  const int N = params_.horizon;
  const int nz = kind_ == ControllerKind::kRobust ? 2 * N : N;
  Vector z(nz);
  if (last_z_.size() != nz) {
    z.head(N).setConstant(std::clamp(1.0, params_.u_min, params_.u_max));
    if (nz > N) z.tail(N).setZero();
    return z;
  }
  for (int block = 0; block < nz / N; ++block) {
    const Vector prev = last_z_.segment(block * N, N);
    z.segment(block * N, N - 1) = prev.tail(N - 1);
    z[block * N + N - 1] = prev[N - 1];
  }
  return z;
}

ZoneOcpSolution ZoneController::solve(const Vector& x, bool cold) {
  if (x.size() != model_.state_size()) throw ConfigError("state dimension does not match the model");
  Vector z0 = shifted_plan();
  if (cold) {
    z0.head(params_.horizon).setConstant(std::clamp(1.0, params_.u_min, params_.u_max));
    z0.tail(z0.size() - params_.horizon).setZero();
  }
  return solve_impl(x, z0, cold ? std::nullopt : last_hessian_);
}

ZoneOcpSolution ZoneController::solve_impl(const Vector& x, const Vector& z0, const std::optional<Matrix>& hessian) {
  const int N = params_.horizon;
  const bool robust = kind_ == ControllerKind::kRobust;
  const int nz = robust ? 2 * N : N;
  const int m = robust ? 3 * N : 2 * N;
  const double level = robust ? set_->level() : 0.0;

  // Cache of the most recent simulation, reused by the derivative callback.
  Vector cached_v;
  std::vector<Vector> cached_states;
  Matrix penalty_hessian;

  auto outputs = [&](const std::vector<Vector>& states, int from, Vector& y, Vector& q) {
    for (int k = from; k < N; ++k) {
      y[k] = model_.efficiency(states[k + 1]);
      if (robust) q[k] = set_->quadratic_form(scaling_.scale(states[k + 1]));
    }
  };

  auto fill = [&](const Vector& z, const Vector& y, const Vector& q, double& f, Vector& c) {
    c.resize(m);
    f = 0.0;
    for (int k = 0; k < N; ++k) {
      if (robust) {
        const double s = z[N + k];
        f += -y[k] + zone_.c1 * s * s;
        c[2 * N + k] = q[k] - level - s;
      } else {
        f += stage_cost(y[k], zone_);
      }
      c[k] = params_.y_min - y[k];
      c[N + k] = y[k] - params_.y_max;
    }
  };

  NlpProblem nlp;
  nlp.n = nz;
  nlp.m = m;
  nlp.lower = Vector::Constant(nz, params_.u_min);
  nlp.upper = Vector::Constant(nz, params_.u_max);
  if (robust) {
    nlp.lower.tail(N).setZero();
    nlp.upper.tail(N).setConstant(std::numeric_limits<double>::infinity());
  }

  nlp.evaluate = [&](const Vector& z, double& f, Vector& c) {
    const Vector v = z.head(N);
    Vector y(N), q(N);
    try {
      simulate_from(x, v, 0, cached_states);
      cached_v = v;
      outputs(cached_states, 0, y, q);
    } catch (const Error&) {
      cached_v.resize(0);
      f = std::numeric_limits<double>::infinity();
      c = Vector::Constant(m, std::numeric_limits<double>::infinity());
      return;
    }
    fill(z, y, q, f, c);
  };

  nlp.derivatives = [&](const Vector& z, double, const Vector&, Vector& grad, Matrix& jac) {
    const Vector v = z.head(N);
    if (cached_v.size() != N || cached_v != v) {
      simulate_from(x, v, 0, cached_states);
      cached_v = v;
    }
    const std::vector<Vector> base = cached_states;
    Vector y(N), q(N);
    outputs(base, 0, y, q);

    Matrix dy = Matrix::Zero(N, N), dq = Matrix::Zero(N, N);
    std::vector<Vector> sp, sm;
    Vector yp(N), ym(N), qp(N), qm(N);
    for (int j = 0; j < N; ++j) {
      // v_j only affects intervals j.. N-1
      const double h = params_.fd_step;
      Vector vp = v, vm = v;
      vp[j] += h;
      vm[j] -= h;
      simulate_from(base[j], vp, j, sp);
      simulate_from(base[j], vm, j, sm);
      outputs(sp, j, yp, qp);
      outputs(sm, j, ym, qm);
      for (int k = j; k < N; ++k) {
        dy(k, j) = (yp[k] - ym[k]) / (2 * h);
        if (robust) dq(k, j) = (qp[k] - qm[k]) / (2 * h);
      }
    }

    grad = Vector::Zero(nz);
    jac = Matrix::Zero(m, nz);
    // Curvature model: Gauss-Newton for the output penalty, exact for the slacks.
    penalty_hessian = Matrix::Zero(nz, nz);
    for (int k = 0; k < N; ++k) {
      const double dl = robust ? -1.0 : stage_cost_derivative(y[k], zone_);
      grad.head(N) += dl * dy.row(k).transpose();
      jac.block(k, 0, 1, N) = -dy.row(k);
      jac.block(N + k, 0, 1, N) = dy.row(k);
      if (robust) {
        grad[N + k] = 2.0 * zone_.c1 * z[N + k];
        jac.block(2 * N + k, 0, 1, N) = dq.row(k);
        jac(2 * N + k, N + k) = -1.0;
        penalty_hessian(N + k, N + k) = 2.0 * zone_.c1;
      } else if (zone_distance(y[k], zone_) > 0.0) {
        penalty_hessian.topLeftCorner(N, N) += 2.0 * zone_.c1 * dy.row(k).transpose() * dy.row(k);
      }
    }
  };

  nlp.hessian = [&](const Vector&) { return penalty_hessian; };
  Vector z_init = z0.cwiseMax(nlp.lower).cwiseMin(nlp.upper);
  if (robust) {
    // slacks start feasible for the predicted trajectory
    Vector y(N), q(N);
    simulate_from(x, z_init.head(N), 0, cached_states);
    cached_v = z_init.head(N);
    outputs(cached_states, 0, y, q);
    for (int k = 0; k < N; ++k) z_init[N + k] = std::max(z_init[N + k], q[k] - level);
  }
  nlp.initial_guess = z_init;

  SqpOptions opts = params_.sqp;
  opts.initial_hessian = hessian;
  ZoneOcpSolution out;
  out.nlp = solve_nlp(nlp, opts);

  out.inputs = out.nlp.z.head(N);
  predict(x, out.inputs, out.predicted_y, out.predicted_states);
  if (robust) {
    out.slacks = out.nlp.z.tail(N);
    out.predicted_quadratic_form.resize(N);
    for (int k = 0; k < N; ++k)
      out.predicted_quadratic_form[k] = set_->quadratic_form(scaling_.scale(out.predicted_states[k + 1]));
  } else {
    out.slacks.resize(N);
    for (int k = 0; k < N; ++k) out.slacks[k] = zone_distance(out.predicted_y[k], zone_);
  }
  for (const auto& s : out.predicted_states)
    if (!ColumnState::unflatten(s, model_.config().n_stages).satisfies_invariants()) out.state_bounds_ok = false;
  out.message = to_string(out.nlp.status);
  return out;
}

ZoneOcpSolution ZoneController::control(const Vector& x) {
  ZoneOcpSolution sol;
  bool usable = false;
  try {
    sol = solve(x);
    if (sol.nlp.status == SolveStatus::kConverged) {
      usable = true;
    } else if (sol.nlp.kkt_residual < params_.accept_kkt && sol.nlp.max_violation < params_.accept_kkt) {
      usable = true;
      sol.warning = true;
    }
  } catch (const Error& e) {
    sol.message = e.what();
  }
  if (usable) {
    last_z_ = sol.nlp.z;
    last_hessian_ = sol.nlp.hessian;
    return sol;
  }

  // Fallback: previous plan shifted by one interval.
  const std::string reason = sol.message;
  const Vector z = shifted_plan();
  const int N = params_.horizon;
  ZoneOcpSolution fb;
  fb.fallback = true;
  fb.message = "fallback: " + reason;
  fb.nlp = sol.nlp;
  fb.inputs = z.head(N);
  predict(x, fb.inputs, fb.predicted_y, fb.predicted_states);
  fb.slacks.resize(N);
  for (int k = 0; k < N; ++k)
    fb.slacks[k] = kind_ == ControllerKind::kRobust
                       ? std::max(0.0, set_->quadratic_form(scaling_.scale(fb.predicted_states[k + 1])) - set_->level())
                       : zone_distance(fb.predicted_y[k], zone_);
  last_z_ = z;
  last_hessian_.reset();
  return fb;
}

int advance_plant(const Plant& plant, Vector& state, double solvent_flow, const Vector& noise, double duration) {
  if (noise.size() != state.size()) throw ConfigError("noise dimension does not match the plant state");
  const Vector disturbance = noise.cwiseProduct(plant.scaling.state_scale());
  const RhsFunction f = [&plant, &disturbance](const Eigen::Ref<const Vector>& s, double u, Eigen::Ref<Vector> d) {
    plant.model.rhs(s, u, d);
    d += disturbance;
  };
  const StepProjection clip = [](Eigen::Ref<Vector> s) {
    int count = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!StateLayout::is_temperature(static_cast<int>(i)) && s[i] < 0.0) {
        s[i] = 0.0;
        ++count;
      } else if (std::abs(s[i]) < kNegligibleConcentration) {
        s[i] = 0.0;
      }
    }
    return count;
  };
  Rk4Stepper stepper(static_cast<int>(state.size()));
  return stepper.advance(f, state, solvent_flow, duration, plant.dt, clip);
}

StepRecord receding_horizon_step(ZoneController& controller, const Plant& plant, Vector& plant_state,
                                 const Vector& noise) {
  const ZoneOcpSolution sol = controller.control(plant_state);
  StepRecord rec;
  rec.u_scaled = sol.inputs[0];
  rec.u = controller.scaling().unscale_input(rec.u_scaled);
  rec.clipped = advance_plant(plant, plant_state, rec.u, noise, controller.params().sampling_time);
  rec.y = plant.model.efficiency(plant_state);
  rec.stage_cost = stage_cost(rec.y, controller.zone());
  rec.slack = sol.slacks.size() ? sol.slacks[0] : 0.0;
  rec.fallback = sol.fallback;
  rec.warning = sol.warning;
  rec.sqp_iterations = sol.nlp.iterations;
  rec.kkt_residual = sol.nlp.kkt_residual;
  rec.status = sol.message;
  return rec;
}

}  // namespace zempc
