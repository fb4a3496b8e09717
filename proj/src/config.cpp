#include "zempc/config.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zempc/error.hpp"

namespace zempc {

using nlohmann::json;

namespace {

// Reads optional members of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }
  void get(const char* key, Composition& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& a = j_.at(key);
    if (!a.is_array() || a.size() != kComponents || !std::all_of(a.begin(), a.end(), [](const json& v) {
          return v.is_number();
        }))
      throw ConfigError("'" + name_ + "." + key + "' must be an array of 4 numbers (CO2, N2, H2O, MEA)");
    for (int i = 0; i < kComponents; ++i) out[i] = a[i].get<double>();
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_profile(const json& j, FlueGasProfile& p) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "constant")
      p = FlueGasProfile::constant();
    else if (s == "ramp")
      p = FlueGasProfile::default_ramp();
    else
      throw ConfigError("unknown flue-gas profile '" + s + "' (expected constant or ramp)");
    return;
  }
  Section s(j, "scenario.flue_gas");
  std::string type = "constant";
  s.get("type", type);
  if (type == "ramp")
    p = FlueGasProfile::default_ramp();
  else if (type == "constant" || type == "custom")
    p = FlueGasProfile::constant();
  else
    throw ConfigError("unknown flue-gas profile '" + type + "' (expected constant, ramp or custom)");
  if (const json* b = s.child("breakpoints")) {
    p.breakpoints.clear();
    for (const json& e : *b) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("flue-gas breakpoints are [step, multiplier] pairs");
      p.breakpoints.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
  }
  if (const json* ph = s.child("phases")) {
    p.phases.clear();
    for (const json& e : *ph) {
      Section q(e, "scenario.flue_gas.phases[]");
      Phase phase;
      q.get("name", phase.name);
      q.get("begin", phase.begin);
      q.get("end", phase.end);
      p.phases.push_back(phase);
    }
  }
}

json profile_to_json(const FlueGasProfile& p) {
  json b = json::array();
  for (const auto& [step, m] : p.breakpoints) b.push_back({step, m});
  json ph = json::array();
  for (const Phase& q : p.phases) ph.push_back({{"name", q.name}, {"begin", q.begin}, {"end", q.end}});
  return {{"type", "custom"}, {"breakpoints", b}, {"phases", ph}};
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const json root = parse(text);
  ExperimentConfig c;
  Section top(root, "config");

  if (const json* j = top.child("column")) {
    Section s(*j, "column");
    s.get("internal_diameter", c.column.internal_diameter);
    s.get("packing_height", c.column.packing_height);
    s.get("n_stages", c.column.n_stages);
    s.get("specific_area", c.column.specific_area);
  }
  if (const json* j = top.child("flue_gas")) {
    Section s(*j, "flue_gas");
    s.get("temperature", c.boundary.gas.temperature);
    s.get("volumetric_flow", c.boundary.gas.volumetric_flow);
    s.get("mole_fractions", c.boundary.gas.mole_fractions);
  }
  if (const json* j = top.child("solvent")) {
    Section s(*j, "solvent");
    s.get("temperature", c.boundary.liquid.temperature);
    s.get("mole_fractions", c.boundary.liquid.mole_fractions);
  }
  if (const json* j = top.child("properties")) {
    PropertyConstants& p = c.properties;
    Section s(*j, "properties");
    s.get("pressure", p.pressure);
    s.get("gas_constant", p.gas_constant);
    s.get("liquid_molar_density", p.liquid_molar_density);
    s.get("gas_film_coefficient", p.gas_film_coefficient);
    s.get("liquid_film_coefficient", p.liquid_film_coefficient);
    s.get("co2_diffusivity", p.co2_diffusivity);
    s.get("rate_constant_prefactor", p.rate_constant_prefactor);
    s.get("rate_constant_activation", p.rate_constant_activation);
    s.get("physical_solubility", p.physical_solubility);
    s.get("equilibrium_coefficient", p.equilibrium_coefficient);
    s.get("equilibrium_reference_temperature", p.equilibrium_reference_temperature);
    s.get("heat_of_absorption", p.heat_of_absorption);
    s.get("lewis_factor", p.lewis_factor);
    s.get("free_amine_floor", p.free_amine_floor);
    s.get("liquid_heat_capacities", p.liquid_heat_capacities);
    s.get("gas_heat_capacities", p.gas_heat_capacities);
    s.get("water_transfer", p.water_transfer);
    s.get("amine_transfer", p.amine_transfer);
    s.get("water_heat_of_vaporization", p.water_heat_of_vaporization);
    s.get("amine_heat_of_vaporization", p.amine_heat_of_vaporization);
  }
  if (const json* j = top.child("zone")) {
    Section s(*j, "zone");
    s.get("lower", c.zone.lower);
    s.get("upper", c.zone.upper);
    s.get("c1", c.zone.c1);
  }
  if (const json* j = top.child("controller")) {
    ControllerParams& p = c.controller;
    Section s(*j, "controller");
    s.get("horizon", p.horizon);
    s.get("sampling_time", p.sampling_time);
    s.get("dt", p.dt);
    s.get("u_min", p.u_min);
    s.get("u_max", p.u_max);
    s.get("y_min", p.y_min);
    s.get("y_max", p.y_max);
    s.get("fd_step", p.fd_step);
    s.get("accept_kkt", p.accept_kkt);
    s.get("sqp_tolerance", p.sqp.tolerance);
    s.get("sqp_max_iterations", p.sqp.max_iterations);
    s.get("elastic_weight", p.sqp.elastic_weight);
  }
  if (const json* j = top.child("zone_mod")) {
    ZoneModParams& p = c.zone_mod;
    Section s(*j, "zone_mod");
    s.get("epsilon", p.epsilon);
    s.get("r", p.r);
    s.get("n_max", p.n_max);
    s.get("alpha", p.alpha);
    s.get("u_max", p.u_max);
    s.get("input_lower", p.input_lower);
    s.get("input_upper", p.input_upper);
    std::string proj = to_string(p.projection);
    s.get("projection", proj);
    p.projection = projection_mode_from_string(proj);
    s.get("sdp_trace_bound", p.sdp.trace_bound);
    s.get("sdp_strictness", p.sdp.strictness);
  }
  if (const json* j = top.child("scenario")) {
    ScenarioConfig& p = c.scenario;
    Section s(*j, "scenario");
    if (const json* ctrl = s.child("controller")) {
      p.controllers.clear();
      if (ctrl->is_string()) {
        p.controllers.push_back(controller_from_string(ctrl->get<std::string>()));
      } else if (ctrl->is_array()) {
        for (const json& e : *ctrl) {
          if (!e.is_string()) throw ConfigError("'scenario.controller' entries must be strings");
          p.controllers.push_back(controller_from_string(e.get<std::string>()));
        }
      } else {
        throw ConfigError("'scenario.controller' must be a string or an array of strings");
      }
    }
    s.get("duration", p.duration);
    s.get("seed", p.seed);
    s.get("noise_bound", p.noise_bound);
    s.get("violation_tolerance", p.violation_tolerance);
    if (const json* f = s.child("flue_gas")) read_profile(*f, p.profile);
    if (const json* y0 = s.child("initial_efficiency")) {
      if (!y0->is_number()) throw ConfigError("'scenario.initial_efficiency' must be a number");
      p.initial_efficiency = y0->get<double>();
    }
    if (const json* mz = s.child("modified_zone")) {
      if (!mz->is_string()) throw ConfigError("'scenario.modified_zone' must be a file path");
      p.modified_zone_file = mz->get<std::string>();
    }
  }
  if (const json* j = top.child("reference_flow_bracket")) {
    if (!j->is_array() || j->size() != 2) throw ConfigError("'reference_flow_bracket' must be [lo, hi] in m3/s");
    c.reference_flow_lo = (*j)[0].get<double>();
    c.reference_flow_hi = (*j)[1].get<double>();
  }

  c.column.validate();
  c.boundary.validate();
  c.zone.validate();
  c.controller.validate();
  c.zone_mod.validate();
  c.scenario.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  ExperimentConfig c = parse_experiment_config(slurp(file));
  // relative zone files are looked up next to the config
  if (c.scenario.modified_zone_file) {
    std::filesystem::path p = *c.scenario.modified_zone_file;
    if (p.is_relative()) c.scenario.modified_zone_file = (file.parent_path() / p).string();
  }
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  const PropertyConstants& p = c.properties;
  json ctrls = json::array();
  for (ControllerChoice k : c.scenario.controllers) ctrls.push_back(to_string(k));
  json scenario = {{"controller", ctrls},
                   {"duration", c.scenario.duration},
                   {"seed", c.scenario.seed},
                   {"noise_bound", c.scenario.noise_bound},
                   {"violation_tolerance", c.scenario.violation_tolerance},
                   {"flue_gas", profile_to_json(c.scenario.profile)}};
  if (c.scenario.initial_efficiency) scenario["initial_efficiency"] = *c.scenario.initial_efficiency;
  if (c.scenario.modified_zone_file) scenario["modified_zone"] = *c.scenario.modified_zone_file;
  json root = {
      {"column",
       {{"internal_diameter", c.column.internal_diameter},
        {"packing_height", c.column.packing_height},
        {"n_stages", c.column.n_stages},
        {"specific_area", c.column.specific_area}}},
      {"flue_gas",
       {{"temperature", c.boundary.gas.temperature},
        {"volumetric_flow", c.boundary.gas.volumetric_flow},
        {"mole_fractions", c.boundary.gas.mole_fractions}}},
      {"solvent",
       {{"temperature", c.boundary.liquid.temperature}, {"mole_fractions", c.boundary.liquid.mole_fractions}}},
      {"properties",
       {{"pressure", p.pressure},
        {"gas_constant", p.gas_constant},
        {"liquid_molar_density", p.liquid_molar_density},
        {"gas_film_coefficient", p.gas_film_coefficient},
        {"liquid_film_coefficient", p.liquid_film_coefficient},
        {"co2_diffusivity", p.co2_diffusivity},
        {"rate_constant_prefactor", p.rate_constant_prefactor},
        {"rate_constant_activation", p.rate_constant_activation},
        {"physical_solubility", p.physical_solubility},
        {"equilibrium_coefficient", p.equilibrium_coefficient},
        {"equilibrium_reference_temperature", p.equilibrium_reference_temperature},
        {"heat_of_absorption", p.heat_of_absorption},
        {"lewis_factor", p.lewis_factor},
        {"free_amine_floor", p.free_amine_floor},
        {"liquid_heat_capacities", p.liquid_heat_capacities},
        {"gas_heat_capacities", p.gas_heat_capacities},
        {"water_transfer", p.water_transfer},
        {"amine_transfer", p.amine_transfer},
        {"water_heat_of_vaporization", p.water_heat_of_vaporization},
        {"amine_heat_of_vaporization", p.amine_heat_of_vaporization}}},
      {"zone", {{"lower", c.zone.lower}, {"upper", c.zone.upper}, {"c1", c.zone.c1}}},
      {"controller",
       {{"horizon", c.controller.horizon},
        {"sampling_time", c.controller.sampling_time},
        {"dt", c.controller.dt},
        {"u_min", c.controller.u_min},
        {"u_max", c.controller.u_max},
        {"y_min", c.controller.y_min},
        {"y_max", c.controller.y_max},
        {"fd_step", c.controller.fd_step},
        {"accept_kkt", c.controller.accept_kkt},
        {"sqp_tolerance", c.controller.sqp.tolerance},
        {"sqp_max_iterations", c.controller.sqp.max_iterations},
        {"elastic_weight", c.controller.sqp.elastic_weight}}},
      {"zone_mod",
       {{"epsilon", c.zone_mod.epsilon},
        {"r", c.zone_mod.r},
        {"n_max", c.zone_mod.n_max},
        {"alpha", c.zone_mod.alpha},
        {"u_max", c.zone_mod.u_max},
        {"input_lower", c.zone_mod.input_lower},
        {"input_upper", c.zone_mod.input_upper},
        {"projection", to_string(c.zone_mod.projection)},
        {"sdp_trace_bound", c.zone_mod.sdp.trace_bound},
        {"sdp_strictness", c.zone_mod.sdp.strictness}}},
      {"scenario", scenario},
      {"reference_flow_bracket", {c.reference_flow_lo, c.reference_flow_hi}}};
  return root.dump(2);
}

std::string modified_zone_to_json(const ModifiedZone& mz) {
  json log = json::array();
  for (const ZoneModIteration& it : mz.log)
    log.push_back({{"iteration", it.iteration},
                   {"relaxed_cost", it.relaxed_cost},
                   {"path", to_string(it.path)},
                   {"level", it.level},
                   {"y_lo", it.y_lo},
                   {"y_hi", it.y_hi},
                   {"accepted", it.accepted},
                   {"note", it.note}});
  json root = {{"empty", mz.empty()},
               {"iterations", mz.iterations},
               {"relaxed_cost", mz.relaxed_cost},
               {"optimal_cost", mz.optimal_cost},
               {"interval", {mz.y_lo, mz.y_hi}},
               {"path", to_string(mz.path)},
               {"diagnostics", mz.diagnostics},
               {"log", log}};
  if (!mz.empty()) {
    const Ellipsoid& e = *mz.ellipsoid;
    json M = json::array();
    for (Eigen::Index i = 0; i < e.shape().rows(); ++i) M.push_back(vector_to_json(e.shape().row(i).transpose()));
    root["center"] = vector_to_json(e.center());
    root["M"] = M;
    root["alpha"] = e.level();
    root["x_s"] = vector_to_json(mz.x_s);
    root["u_s"] = mz.u_s;
  }
  return root.dump(2);
}

ModifiedZone modified_zone_from_json(const std::string& text) {
  const json root = parse(text);
  ModifiedZone mz;
  try {
    mz.iterations = root.at("iterations").get<int>();
    mz.relaxed_cost = root.at("relaxed_cost").get<double>();
    mz.optimal_cost = root.at("optimal_cost").get<double>();
    mz.y_lo = root.at("interval").at(0).get<double>();
    mz.y_hi = root.at("interval").at(1).get<double>();
    mz.path = root.at("path").get<std::string>() == "sdp" ? SetPath::kSdp : SetPath::kLyapunov;
    mz.diagnostics = root.value("diagnostics", "");
    for (const json& j : root.value("log", json::array())) {
      ZoneModIteration it;
      it.iteration = j.at("iteration").get<int>();
      it.relaxed_cost = j.at("relaxed_cost").get<double>();
      it.path = j.at("path").get<std::string>() == "sdp" ? SetPath::kSdp : SetPath::kLyapunov;
      it.level = j.at("level").get<double>();
      it.y_lo = j.at("y_lo").get<double>();
      it.y_hi = j.at("y_hi").get<double>();
      it.accepted = j.at("accepted").get<bool>();
      it.note = j.value("note", "");
      mz.log.push_back(std::move(it));
    }
    if (!root.at("empty").get<bool>()) {
      const Vector center = vector_from_json(root.at("center"));
      const json& Mj = root.at("M");
      const auto n = center.size();
      if (static_cast<Eigen::Index>(Mj.size()) != n) throw ConfigError("saved zone: M does not match the center");
      Matrix M(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vector row = vector_from_json(Mj.at(i));
        if (row.size() != n) throw ConfigError("saved zone: M is not square");
        M.row(i) = row.transpose();
      }
      mz.ellipsoid = Ellipsoid(center, M, root.at("alpha").get<double>());
      mz.x_s = vector_from_json(root.at("x_s"));
      mz.u_s = root.at("u_s").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("saved zone is incomplete: ") + e.what());
  }
  return mz;
}

ModifiedZone load_modified_zone(const std::filesystem::path& file) { return modified_zone_from_json(slurp(file)); }

}  // namespace zempc
