#include "zempc/column_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "zempc/error.hpp"
#include "zempc/numerics/integrate.hpp"

namespace zempc {

void ColumnConfig::validate() const {
  if (n_stages < 2) throw ConfigError("n_stages must be at least 2");
  if (!(internal_diameter > 0) || !(packing_height > 0) || !(specific_area > 0))
    throw ConfigError("column dimensions must be positive");
}

double ColumnConfig::cross_section() const { return std::numbers::pi * internal_diameter * internal_diameter / 4.0; }

double ColumnConfig::stage_height() const { return packing_height / n_stages; }

namespace {

void check_fractions(const Composition& x, const char* what) {
  double sum = 0.0;
  for (double v : x) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " mole fraction outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " mole fractions must sum to 1");
}

}  // namespace

void StreamBoundary::validate() const {
  check_fractions(gas.mole_fractions, "gas inlet");
  check_fractions(liquid.mole_fractions, "liquid inlet");
  if (!(gas.volumetric_flow >= 0)) throw ConfigError("gas flow must be non-negative");
  if (!(gas.temperature > 0) || !(liquid.temperature > 0)) throw ConfigError("inlet temperatures must be positive");
}

Vector ColumnState::flatten() const {
  Vector x(static_cast<Eigen::Index>(stages.size()) * kStateSize);
  for (std::size_t j = 0; j < stages.size(); ++j) {
    const int s = static_cast<int>(j);
    for (int i = 0; i < kComponents; ++i) {
      x[StateLayout::liquid(s, i)] = stages[j].c_liquid[i];
      x[StateLayout::gas(s, i)] = stages[j].c_gas[i];
    }
    x[StateLayout::liquid_temperature(s)] = stages[j].T_liquid;
    x[StateLayout::gas_temperature(s)] = stages[j].T_gas;
  }
  return x;
}

ColumnState ColumnState::unflatten(const Vector& x, int n_stages) {
  if (x.size() != n_stages * kStateSize) throw ConfigError("state vector size does not match the stage count");
  ColumnState state;
  state.stages.resize(n_stages);
  for (int j = 0; j < n_stages; ++j) {
    for (int i = 0; i < kComponents; ++i) {
      state.stages[j].c_liquid[i] = x[StateLayout::liquid(j, i)];
      state.stages[j].c_gas[i] = x[StateLayout::gas(j, i)];
    }
    state.stages[j].T_liquid = x[StateLayout::liquid_temperature(j)];
    state.stages[j].T_gas = x[StateLayout::gas_temperature(j)];
  }
  return state;
}

bool ColumnState::satisfies_invariants() const {
  for (const auto& s : stages) {
    for (int i = 0; i < kComponents; ++i)
      if (!(s.c_liquid[i] >= 0) || !(s.c_gas[i] >= 0)) return false;
    for (double T : {s.T_liquid, s.T_gas})
      if (!(T > 250.0 && T < 450.0)) return false;
  }
  return true;
}

void column_rhs(const Eigen::Ref<const Vector>& x, double solvent_flow, const StreamBoundary& boundary,
                const ColumnConfig& config, const PropertyPackage& props, Eigen::Ref<Vector> dx) {
  if (!(solvent_flow >= 0)) throw DomainError("solvent flow must be non-negative");
  const int n = config.n_stages;
  if (x.size() != config.state_size() || dx.size() != x.size())
    throw ConfigError("state vector size does not match the stage count");

  const double volume_factor = 1.0 / (config.cross_section() * config.stage_height());
  const double liquid_rate = solvent_flow * volume_factor;
  const double gas_rate = boundary.gas.volumetric_flow * volume_factor;
  const double a = config.specific_area;
  const Composition liquid_in = props.liquid_concentrations(boundary.liquid);
  const Composition gas_in = props.gas_concentrations(boundary.gas);

  Composition cp_liquid{}, cp_gas{};
  for (int i = 0; i < kComponents; ++i) {
    cp_liquid[i] = props.liquid_heat_capacity(i);
    cp_gas[i] = props.gas_heat_capacity(i);
  }

  for (int j = 0; j < n; ++j) {
    const double* cl = x.data() + StateLayout::liquid(j, 0);
    const double* cg = x.data() + StateLayout::gas(j, 0);
    const double TL = x[StateLayout::liquid_temperature(j)];
    const double TG = x[StateLayout::gas_temperature(j)];

    // liquid from the stage above, gas from the stage below
    const double* cl_up = j == 0 ? liquid_in.data() : x.data() + StateLayout::liquid(j - 1, 0);
    const double TL_up = j == 0 ? boundary.liquid.temperature : x[StateLayout::liquid_temperature(j - 1)];
    const double* cg_up = j == n - 1 ? gas_in.data() : x.data() + StateLayout::gas(j + 1, 0);
    const double TG_up = j == n - 1 ? boundary.gas.temperature : x[StateLayout::gas_temperature(j + 1)];

    const InterfaceRates rates = props.transfer(StageConditions{cl, cg, TL, TG});

    double heat_liquid = 0.0, heat_gas = 0.0;
    for (int i = 0; i < kComponents; ++i) {
      const double source = rates.molar_flux[i] * a;
      dx[StateLayout::liquid(j, i)] = liquid_rate * (cl_up[i] - cl[i]) + source;
      dx[StateLayout::gas(j, i)] = gas_rate * (cg_up[i] - cg[i]) - source;
      heat_liquid += cl[i] * cp_liquid[i];
      heat_gas += cg[i] * cp_gas[i];
    }
    dx[StateLayout::liquid_temperature(j)] = liquid_rate * (TL_up - TL) + rates.heat_to_liquid * a / heat_liquid;
    dx[StateLayout::gas_temperature(j)] = gas_rate * (TG_up - TG) + rates.heat_to_gas * a / heat_gas;

    for (int k = j * kStateSize; k < (j + 1) * kStateSize; ++k)
      if (!std::isfinite(dx[k])) throw ModelError("non-finite right-hand side", j);
  }
}

Vector column_rhs(const Vector& x, double solvent_flow, const StreamBoundary& boundary, const ColumnConfig& config,
                  const PropertyPackage& props) {
  Vector dx(x.size());
  column_rhs(x, solvent_flow, boundary, config, props, dx);
  return dx;
}

std::vector<std::pair<double, double>> co2_transfer_sources(const Vector& x, const ColumnConfig& config,
                                                            const PropertyPackage& props) {
  // Mirrors the source terms of column_rhs.
  std::vector<std::pair<double, double>> out;
  out.reserve(config.n_stages);
  for (int j = 0; j < config.n_stages; ++j) {
    const InterfaceRates r =
        props.transfer(StageConditions{x.data() + StateLayout::liquid(j, 0), x.data() + StateLayout::gas(j, 0),
                                       x[StateLayout::liquid_temperature(j)], x[StateLayout::gas_temperature(j)]});
    const double source = r.molar_flux[kCO2] * config.specific_area;
    out.emplace_back(source, -source);
  }
  return out;
}

double efficiency(const Vector& x, const StreamBoundary& boundary, const ColumnConfig& config,
                  const PropertyPackage& props) {
  if (x.size() != config.state_size()) throw ConfigError("state vector size does not match the stage count");
  const double c_in = props.gas_concentrations(boundary.gas)[kCO2];
  const double flow_in = c_in * boundary.gas.volumetric_flow;
  if (!(flow_in > 0)) throw DomainError("inlet CO2 flow must be positive");
  const double flow_out = x[StateLayout::gas(0, kCO2)] * boundary.gas.volumetric_flow;
  return (flow_in - flow_out) / flow_in;
}

AbsorberModel::AbsorberModel(ColumnConfig config, StreamBoundary boundary,
                             std::shared_ptr<const PropertyPackage> props)
    : config_(config), boundary_(boundary), props_(std::move(props)) {
  config_.validate();
  boundary_.validate();
  if (!props_) props_ = std::make_shared<DefaultPropertyPackage>();
  gas_in_ = props_->gas_concentrations(boundary_.gas);
  liquid_in_ = props_->liquid_concentrations(boundary_.liquid);
}

AbsorberModel AbsorberModel::with_gas_flow_multiplier(double factor) const {
  if (!(factor > 0)) throw ConfigError("flow multiplier must be positive");
  StreamBoundary b = boundary_;
  b.gas.volumetric_flow *= factor;
  return AbsorberModel(config_, b, props_);
}

void AbsorberModel::rhs(const Eigen::Ref<const Vector>& x, double solvent_flow, Eigen::Ref<Vector> dx) const {
  column_rhs(x, solvent_flow, boundary_, config_, *props_, dx);
}

Vector AbsorberModel::rhs(const Vector& x, double solvent_flow) const {
  Vector dx(x.size());
  rhs(x, solvent_flow, dx);
  return dx;
}

double AbsorberModel::efficiency(const Vector& x) const { return zempc::efficiency(x, boundary_, config_, *props_); }

Co2Balance AbsorberModel::co2_balance(const Vector& x, double solvent_flow) const {
  const int n = config_.n_stages;
  Co2Balance b;
  b.gas_in = boundary_.gas.volumetric_flow * gas_in_[kCO2];
  b.liquid_in = solvent_flow * liquid_in_[kCO2];
  b.gas_out = boundary_.gas.volumetric_flow * x[StateLayout::gas(0, kCO2)];
  b.liquid_out = solvent_flow * x[StateLayout::liquid(n - 1, kCO2)];
  return b;
}

Vector AbsorberModel::inlet_filled_state() const {
  ColumnState s;
  s.stages.resize(config_.n_stages);
  for (auto& st : s.stages) {
    st.c_liquid = liquid_in_;
    st.c_gas = gas_in_;
    st.T_liquid = boundary_.liquid.temperature;
    st.T_gas = boundary_.gas.temperature;
  }
  return s.flatten();
}

double scaled_residual(const Vector& x, const Vector& f) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double ref = StateLayout::is_temperature(static_cast<int>(i)) ? 1.0 : 1e-3;
    worst = std::max(worst, std::abs(f[i]) / std::max(std::abs(x[i]), ref));
  }
  return std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
}

namespace {

Matrix state_jacobian(const AbsorberModel& model, const Vector& x, double u) {
  const Eigen::Index n = x.size();
  Matrix J(n, n);
  Vector xp = x, fp(n), fm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::max(1e-7, 1e-7 * std::abs(x[i]));
    xp[i] = x[i] + h;
    model.rhs(xp, u, fp);
    xp[i] = x[i] - h;
    model.rhs(xp, u, fm);
    xp[i] = x[i];
    J.col(i) = (fp - fm) / (2.0 * h);
  }
  return J;
}

double safe_residual(const AbsorberModel& model, const Vector& x, double u) {
  try {
    return scaled_residual(x, model.rhs(x, u));
  } catch (const ModelError&) {
    return std::numeric_limits<double>::infinity();
  }
}

// Damped Newton; returns true on convergence. x is updated to the best point.
bool newton(const AbsorberModel& model, double u, Vector& x, const SteadyStateOptions& opt, double& best) {
  best = safe_residual(model, x, u);
  int polish = 0;
  for (int it = 0; it < opt.max_newton_iterations; ++it) {
    if (best <= opt.tolerance && (++polish > 3 || best <= 1e-4 * opt.tolerance)) break;
    const Vector f = model.rhs(x, u);
    const Eigen::PartialPivLU<Matrix> lu(state_jacobian(model, x, u));
    const Vector step = lu.solve(-f);
    if (!step.allFinite()) return false;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-4) {
      const Vector trial = x + lambda * step;
      const double r = safe_residual(model, trial, u);
      if (r < best) {
        x = trial;
        best = r;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  return best <= opt.tolerance;
}

}  // namespace

Vector steady_state(const AbsorberModel& model, double solvent_flow, const std::optional<Vector>& initial_guess,
                    const SteadyStateOptions& options) {
  if (!(solvent_flow > 0)) throw DomainError("steady state requires a positive solvent flow");
  Vector x = initial_guess ? *initial_guess : model.inlet_filled_state();
  if (x.size() != model.state_size()) throw ConfigError("initial guess has the wrong size");

  double best = std::numeric_limits<double>::infinity();
  if (newton(model, solvent_flow, x, options, best)) return x;

  // Globalize by marching the dynamics toward the attractor, then retry.
  const RhsFunction f = [&model](const Eigen::Ref<const Vector>& s, double u, Eigen::Ref<Vector> d) {
    model.rhs(s, u, d);
  };
  Rk4Stepper stepper(model.state_size());
  for (int round = 0; round < 4; ++round) {
    try {
      stepper.advance(f, x, solvent_flow, options.globalization_horizon, options.dt);
    } catch (const Error&) {
      x = model.inlet_filled_state();
      stepper.advance(f, x, solvent_flow, options.globalization_horizon, options.dt);
    }
    double r = std::numeric_limits<double>::infinity();
    if (newton(model, solvent_flow, x, options, r)) return x;
    best = std::min(best, r);
  }
  throw ConvergenceError("steady-state solve did not converge", best);
}

Vector steady_state(double solvent_flow, const StreamBoundary& boundary, const ColumnConfig& config,
                    std::shared_ptr<const PropertyPackage> props) {
  return steady_state(AbsorberModel(config, boundary, std::move(props)), solvent_flow);
}

SteadyStatePoint steady_state_for_efficiency(const AbsorberModel& model, double target, double flow_lo,
                                             double flow_hi, double tolerance) {
  if (!(flow_lo > 0) || !(flow_hi > flow_lo)) throw DomainError("invalid solvent flow bracket");
  Vector x_lo = steady_state(model, flow_lo);
  Vector x_hi = steady_state(model, flow_hi, x_lo);
  double y_lo = model.efficiency(x_lo), y_hi = model.efficiency(x_hi);
  if (target < y_lo || target > y_hi)
    throw DomainError("target efficiency " + std::to_string(target) + " outside reachable range [" +
                      std::to_string(y_lo) + ", " + std::to_string(y_hi) + "]");

  // Bisection on the monotone steady-state map, warm-starting from the nearer end.
  double lo = flow_lo, hi = flow_hi;
  SteadyStatePoint best{lo, x_lo, y_lo};
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vector& guess = (target - y_lo < y_hi - target) ? x_lo : x_hi;
    const Vector xm = steady_state(model, mid, guess);
    const double ym = model.efficiency(xm);
    best = {mid, xm, ym};
    if (std::abs(ym - target) <= tolerance) return best;
    if (ym < target) {
      lo = mid;
      x_lo = xm;
      y_lo = ym;
    } else {
      hi = mid;
      x_hi = xm;
      y_hi = ym;
    }
    if (hi - lo <= 1e-15 * hi) break;
  }
  if (std::abs(best.efficiency - target) <= 1e-6) return best;
  throw ConvergenceError("efficiency bisection did not converge", std::abs(best.efficiency - target));
}

Scaling::Scaling(Vector x_scale, double u_scale) : x_scale_(std::move(x_scale)), u_scale_(u_scale) {
  if (x_scale_.size() == 0) throw ConfigError("empty state scaling");
  for (Eigen::Index i = 0; i < x_scale_.size(); ++i)
    if (!(std::abs(x_scale_[i]) > 0) || !std::isfinite(x_scale_[i]))
      throw ConfigError("state scaling entry " + std::to_string(i) + " must be non-zero and finite");
  if (!(u_scale_ > 0) || !std::isfinite(u_scale_)) throw ConfigError("input scaling must be positive");
}

Scaling Scaling::from_reference(const Vector& x_ref, double u_ref, double zero_floor) {
  Vector s = x_ref;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] == 0.0) s[i] = zero_floor;
  return Scaling(s, u_ref);
}

Vector Scaling::scale(const Vector& x) const {
  if (x.size() != x_scale_.size()) throw ConfigError("state vector size does not match the scaling");
  return x.cwiseQuotient(x_scale_);
}

Vector Scaling::unscale(const Vector& x_hat) const {
  if (x_hat.size() != x_scale_.size()) throw ConfigError("state vector size does not match the scaling");
  return x_hat.cwiseProduct(x_scale_);
}

}  // namespace zempc
