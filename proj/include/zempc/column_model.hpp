#pragma once
// Rate-based absorber column discretized by the method of lines.
//
// State layout (fixed, everything downstream depends on it): stage-major,
// stage 0 at the top of the column (solvent inlet, treated-gas outlet), and
// per stage
//
//   [c_L(CO2, N2, H2O, MEA), c_G(CO2, N2, H2O, MEA), T_L, T_G]
//
// so the default 5-stage column has 50 states. Concentrations are kmol/m3,
// temperatures K. The liquid flows down (enters stage 0), the gas flows up
// (enters stage n-1).

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace zempc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kComponents = 4;
inline constexpr int kStateSize = 2 * kComponents + 2;  // per stage
enum Component : int { kCO2 = 0, kN2 = 1, kH2O = 2, kMEA = 3 };

using Composition = std::array<double, kComponents>;

struct ColumnConfig {
  double internal_diameter = 0.43;  // m
  double packing_height = 6.1;      // m
  int n_stages = 5;
  double specific_area = 143.9;  // m2/m3

  void validate() const;
  double cross_section() const;  // m2
  double stage_height() const;   // m
  int state_size() const { return n_stages * kStateSize; }
};

struct GasInlet {
  double temperature = 319.70;     // K
  double volumetric_flow = 0.0832;  // m3/s
  Composition mole_fractions{0.15, 0.80, 0.05, 0.0};
};

struct LiquidInlet {
  double temperature = 314.0;  // K
  Composition mole_fractions{0.0266, 0.0, 0.8630, 0.1104};
};

/// Inlet streams. The solvent flow is the manipulated input and is not stored.
struct StreamBoundary {
  GasInlet gas;
  LiquidInlet liquid;

  void validate() const;
};

/// Index helpers for the flattened state.
struct StateLayout {
  static constexpr int liquid(int stage, int comp) { return stage * kStateSize + comp; }
  static constexpr int gas(int stage, int comp) { return stage * kStateSize + kComponents + comp; }
  static constexpr int liquid_temperature(int stage) { return stage * kStateSize + 2 * kComponents; }
  static constexpr int gas_temperature(int stage) { return stage * kStateSize + 2 * kComponents + 1; }
  static constexpr bool is_temperature(int index) { return index % kStateSize >= 2 * kComponents; }
};

struct StageState {
  Composition c_liquid{};
  Composition c_gas{};
  double T_liquid = 0.0;
  double T_gas = 0.0;
};

/// Structured view of the flattened state vector.
struct ColumnState {
  std::vector<StageState> stages;

  Vector flatten() const;
  static ColumnState unflatten(const Vector& x, int n_stages);

  /// Concentrations >= 0 and temperatures in (250, 450) K.
  bool satisfies_invariants() const;
};

/// Local conditions seen by the property package at one stage.
struct StageConditions {
  const double* c_liquid;  // kComponents entries
  const double* c_gas;     // kComponents entries
  double T_liquid;
  double T_gas;
};

/// Interfacial transfer at one stage. Positive molar flux means gas -> liquid.
struct InterfaceRates {
  Composition molar_flux{};    // kmol/(m2 s)
  double heat_to_liquid = 0.0;  // kJ/(m2 s)
  double heat_to_gas = 0.0;     // kJ/(m2 s)
};

/// Physical and chemical property correlations consumed by the balances.
class PropertyPackage {
 public:
  virtual ~PropertyPackage() = default;

  virtual InterfaceRates transfer(const StageConditions& stage) const = 0;
  virtual double liquid_heat_capacity(int comp) const = 0;  // kJ/(kmol K)
  virtual double gas_heat_capacity(int comp) const = 0;     // kJ/(kmol K)

  /// Converts inlet mole fractions to concentrations (kmol/m3).
  virtual Composition gas_concentrations(const GasInlet& gas) const = 0;
  virtual Composition liquid_concentrations(const LiquidInlet& liquid) const = 0;
};

/// Constants of the default package: every number the default correlations
/// use. Representative of 30 wt% MEA at near-atmospheric pressure, not fitted
/// plant data.
struct PropertyConstants {
  double pressure = 101.325;             // kPa, uniform along the column
  double gas_constant = 8.314;           // kJ/(kmol K)
  double liquid_molar_density = 43.0;    // kmol/m3
  double gas_film_coefficient = 0.01;    // k_G, m/s
  double liquid_film_coefficient = 1e-4;  // k_L, m/s
  double co2_diffusivity = 1.4e-9;       // m2/s in the solvent
  double rate_constant_prefactor = 4.4e11;  // k2 Arrhenius prefactor, m3/(kmol s)
  double rate_constant_activation = 5400.0;  // k2 activation temperature, K
  double physical_solubility = 1.2;      // dimensionless c_G/c_L for free CO2
  double equilibrium_coefficient = 2.6e-4;  // Henry-type slope at reference T
  double equilibrium_reference_temperature = 314.0;  // K
  double heat_of_absorption = 85000.0;   // kJ/kmol CO2, released to the liquid
  double lewis_factor = 1.1;             // (Sc/Pr)^(2/3), Chilton-Colburn
  double free_amine_floor = 1e-3;        // smoothing width for free MEA, kmol/m3
  Composition liquid_heat_capacities{37.0, 29.0, 75.0, 160.0};  // kJ/(kmol K)
  Composition gas_heat_capacities{37.0, 29.0, 34.0, 100.0};     // kJ/(kmol K)

  // Optional volatile transfer (Raoult + Antoine); disabled by default.
  bool water_transfer = false;
  bool amine_transfer = false;
  double water_heat_of_vaporization = 40700.0;  // kJ/kmol
  double amine_heat_of_vaporization = 58000.0;  // kJ/kmol
};

/// Default correlations: film model with a pseudo-first-order enhancement
/// factor for CO2, Henry-type linear equilibrium whose temperature dependence
/// follows the heat of absorption, and Chilton-Colburn heat transfer.
class DefaultPropertyPackage final : public PropertyPackage {
 public:
  explicit DefaultPropertyPackage(PropertyConstants constants = {});

  InterfaceRates transfer(const StageConditions& stage) const override;
  double liquid_heat_capacity(int comp) const override;
  double gas_heat_capacity(int comp) const override;
  Composition gas_concentrations(const GasInlet& gas) const override;
  Composition liquid_concentrations(const LiquidInlet& liquid) const override;

  /// E = sqrt(1 + Ha^2) with Ha = sqrt(k2 c_MEA,free D_CO2) / k_L.
  double enhancement_factor(double c_mea_total, double c_co2_total, double T_liquid) const;
  /// Gas concentration of CO2 in equilibrium with the liquid, kmol/m3.
  double co2_equilibrium_concentration(double c_co2_total, double T_liquid) const;
  /// Gas-film heat transfer coefficient, kW/(m2 K).
  double heat_transfer_coefficient(const double* c_gas) const;

  const PropertyConstants& constants() const { return constants_; }

 private:
  PropertyConstants constants_;
};

/// Right-hand side of the semidiscretized balances. Writes dx/dt into `dx`.
/// Throws DomainError for negative solvent flow and ModelError (with stage
/// index) when the property package yields non-finite rates.
void column_rhs(const Eigen::Ref<const Vector>& x, double solvent_flow, const StreamBoundary& boundary,
                const ColumnConfig& config, const PropertyPackage& props, Eigen::Ref<Vector> dx);

Vector column_rhs(const Vector& x, double solvent_flow, const StreamBoundary& boundary,
                  const ColumnConfig& config, const PropertyPackage& props);

/// Per-stage CO2 transfer source terms (liquid, gas) in kmol/(m3 s).
std::vector<std::pair<double, double>> co2_transfer_sources(const Vector& x, const ColumnConfig& config,
                                                            const PropertyPackage& props);

/// CO2 molar flows at the column boundaries, kmol/s.
struct Co2Balance {
  double gas_in = 0.0;
  double liquid_in = 0.0;
  double gas_out = 0.0;
  double liquid_out = 0.0;
  double total_in() const { return gas_in + liquid_in; }
  double total_out() const { return gas_out + liquid_out; }
};

/// Absorber: configuration, inlet streams and property package bundled.
/// Immutable once built; copies share the property package.
class AbsorberModel {
 public:
  AbsorberModel(ColumnConfig config, StreamBoundary boundary,
                std::shared_ptr<const PropertyPackage> props = nullptr);

  const ColumnConfig& config() const { return config_; }
  const StreamBoundary& boundary() const { return boundary_; }
  const PropertyPackage& properties() const { return *props_; }
  std::shared_ptr<const PropertyPackage> properties_ptr() const { return props_; }
  int state_size() const { return config_.state_size(); }

  /// Same column and solvent, gas flow multiplied by `factor`.
  AbsorberModel with_gas_flow_multiplier(double factor) const;

  void rhs(const Eigen::Ref<const Vector>& x, double solvent_flow, Eigen::Ref<Vector> dx) const;
  Vector rhs(const Vector& x, double solvent_flow) const;

  /// CO2 absorption efficiency as a fraction.
  double efficiency(const Vector& x) const;
  Co2Balance co2_balance(const Vector& x, double solvent_flow) const;

  /// Uniform column filled with the inlet streams; starting guess for solves.
  Vector inlet_filled_state() const;

  const Composition& gas_inlet_concentrations() const { return gas_in_; }
  const Composition& liquid_inlet_concentrations() const { return liquid_in_; }

 private:
  ColumnConfig config_;
  StreamBoundary boundary_;
  std::shared_ptr<const PropertyPackage> props_;
  Composition gas_in_{};
  Composition liquid_in_{};
};

/// y = (CO2 in - CO2 out) / CO2 in from the top-stage gas concentration.
double efficiency(const Vector& x, const StreamBoundary& boundary, const ColumnConfig& config,
                  const PropertyPackage& props);

/// Residual norm used by the steady-state solver: max_i |f_i| / max(|x_i|, ref_i)
/// with ref = 1e-3 kmol/m3 for concentrations and 1 K for temperatures.
double scaled_residual(const Vector& x, const Vector& f);

struct SteadyStateOptions {
  double tolerance = 1e-8;
  int max_newton_iterations = 60;
  double globalization_horizon = 7200.0;  // s of RK4 integration before retrying Newton
  double dt = 1.0;
};

/// Steady state at constant solvent flow via damped Newton, with long-horizon
/// integration as globalization. Throws ConvergenceError on failure.
Vector steady_state(const AbsorberModel& model, double solvent_flow,
                    const std::optional<Vector>& initial_guess = std::nullopt,
                    const SteadyStateOptions& options = {});

Vector steady_state(double solvent_flow, const StreamBoundary& boundary, const ColumnConfig& config,
                    std::shared_ptr<const PropertyPackage> props);

/// Solvent flow whose steady state has efficiency `target`, by bisection over
/// [flow_lo, flow_hi]. Also returns the steady state.
struct SteadyStatePoint {
  double solvent_flow = 0.0;
  Vector state;
  double efficiency = 0.0;
};
SteadyStatePoint steady_state_for_efficiency(const AbsorberModel& model, double target, double flow_lo,
                                             double flow_hi, double tolerance = 1e-9);

/// Elementwise state/input scaling x_hat = x / x_scale, u_hat = u / u_scale.
class Scaling {
 public:
  Scaling(Vector x_scale, double u_scale);

  /// Builds the scaling from a reference steady state. Coordinates that are
  /// identically zero there (species absent from a phase) get `zero_floor`.
  static Scaling from_reference(const Vector& x_ref, double u_ref, double zero_floor = 1e-3);

  Vector scale(const Vector& x) const;
  Vector unscale(const Vector& x_hat) const;
  double scale_input(double u) const { return u / u_scale_; }
  double unscale_input(double u_hat) const { return u_hat * u_scale_; }

  const Vector& state_scale() const { return x_scale_; }
  double input_scale() const { return u_scale_; }

 private:
  Vector x_scale_;
  double u_scale_;
};

}  // namespace zempc
