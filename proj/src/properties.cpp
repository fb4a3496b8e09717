#include <cmath>

#include "zempc/column_model.hpp"
#include "zempc/error.hpp"

namespace zempc {
namespace {

// Smooth max(z, 0) with width delta; stays strictly positive.
double smooth_positive(double z, double delta) { return 0.5 * (z + std::sqrt(z * z + delta * delta)); }

// Saturation pressures in kPa.
double water_vapor_pressure(double T) {
  const double tc = T - 273.15;
  return 0.133322 * std::pow(10.0, 8.07131 - 1730.63 / (233.426 + tc));
}

double amine_vapor_pressure(double T) { return 100.0 * std::pow(10.0, 4.29252 - 1408.873 / (T - 116.093)); }

}  // namespace

DefaultPropertyPackage::DefaultPropertyPackage(PropertyConstants constants) : constants_(constants) {
  const auto& c = constants_;
  if (!(c.pressure > 0) || !(c.gas_constant > 0) || !(c.liquid_molar_density > 0) ||
      !(c.gas_film_coefficient > 0) || !(c.liquid_film_coefficient > 0) || !(c.co2_diffusivity > 0) ||
      !(c.physical_solubility > 0) || !(c.equilibrium_coefficient >= 0) ||
      !(c.equilibrium_reference_temperature > 0) || !(c.free_amine_floor > 0))
    throw ConfigError("property constants must be positive");
  for (int i = 0; i < kComponents; ++i)
    if (!(c.liquid_heat_capacities[i] > 0) || !(c.gas_heat_capacities[i] > 0))
      throw ConfigError("heat capacities must be positive");
}

double DefaultPropertyPackage::enhancement_factor(double c_mea_total, double c_co2_total, double T_liquid) const {
  const auto& c = constants_;
  const double free_amine = smooth_positive(c_mea_total - 2.0 * c_co2_total, c.free_amine_floor);
  const double k2 = c.rate_constant_prefactor * std::exp(-c.rate_constant_activation / T_liquid);
  const double hatta = std::sqrt(k2 * free_amine * c.co2_diffusivity) / c.liquid_film_coefficient;
  return std::sqrt(1.0 + hatta * hatta);
}

double DefaultPropertyPackage::co2_equilibrium_concentration(double c_co2_total, double T_liquid) const {
  const auto& c = constants_;
  const double slope = c.equilibrium_coefficient *
                       std::exp(c.heat_of_absorption / c.gas_constant *
                                (1.0 / c.equilibrium_reference_temperature - 1.0 / T_liquid));
  return slope * c_co2_total;
}

double DefaultPropertyPackage::heat_transfer_coefficient(const double* c_gas) const {
  // k_G * c_tot * cp_mix reduces to k_G * sum(c_i cp_i)
  double heat_capacity = 0.0;
  for (int i = 0; i < kComponents; ++i) heat_capacity += c_gas[i] * constants_.gas_heat_capacities[i];
  return constants_.gas_film_coefficient * heat_capacity * constants_.lewis_factor;
}

InterfaceRates DefaultPropertyPackage::transfer(const StageConditions& s) const {
  const auto& c = constants_;
  InterfaceRates r;

  const double enhanced_kl =
      enhancement_factor(s.c_liquid[kMEA], s.c_liquid[kCO2], s.T_liquid) * c.liquid_film_coefficient;
  const double overall = 1.0 / (1.0 / c.gas_film_coefficient + c.physical_solubility / enhanced_kl);
  r.molar_flux[kCO2] = overall * (s.c_gas[kCO2] - co2_equilibrium_concentration(s.c_liquid[kCO2], s.T_liquid));

  double latent = 0.0;
  if (c.water_transfer || c.amine_transfer) {
    double liquid_total = 0.0;
    for (int i = 0; i < kComponents; ++i) liquid_total += s.c_liquid[i];
    const double rt = c.gas_constant * s.T_liquid;
    if (c.water_transfer && liquid_total > 0) {
      const double c_eq = s.c_liquid[kH2O] / liquid_total * water_vapor_pressure(s.T_liquid) / rt;
      r.molar_flux[kH2O] = c.gas_film_coefficient * (s.c_gas[kH2O] - c_eq);
      latent += c.water_heat_of_vaporization * r.molar_flux[kH2O];
    }
    if (c.amine_transfer && liquid_total > 0) {
      const double c_eq = s.c_liquid[kMEA] / liquid_total * amine_vapor_pressure(s.T_liquid) / rt;
      r.molar_flux[kMEA] = c.gas_film_coefficient * (s.c_gas[kMEA] - c_eq);
      latent += c.amine_heat_of_vaporization * r.molar_flux[kMEA];
    }
  }

  const double h = heat_transfer_coefficient(s.c_gas);
  r.heat_to_liquid = c.heat_of_absorption * r.molar_flux[kCO2] + latent + h * (s.T_gas - s.T_liquid);
  r.heat_to_gas = h * (s.T_liquid - s.T_gas);
  return r;
}

double DefaultPropertyPackage::liquid_heat_capacity(int comp) const { return constants_.liquid_heat_capacities.at(comp); }

double DefaultPropertyPackage::gas_heat_capacity(int comp) const { return constants_.gas_heat_capacities.at(comp); }

Composition DefaultPropertyPackage::gas_concentrations(const GasInlet& gas) const {
  Composition out{};
  const double total = constants_.pressure / (constants_.gas_constant * gas.temperature);
  for (int i = 0; i < kComponents; ++i) out[i] = gas.mole_fractions[i] * total;
  return out;
}

Composition DefaultPropertyPackage::liquid_concentrations(const LiquidInlet& liquid) const {
  Composition out{};
  for (int i = 0; i < kComponents; ++i) out[i] = liquid.mole_fractions[i] * constants_.liquid_molar_density;
  return out;
}

}  // namespace zempc
