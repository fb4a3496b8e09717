#include "zempc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "zempc/error.hpp"

namespace zempc {

std::string to_string(ControllerChoice c) {
  switch (c) {
    case ControllerChoice::kNzempc: return "nzempc";
    case ControllerChoice::kRzempc: return "rzempc";
    case ControllerChoice::kRzempcCenter: return "rzempc-center";
  }
  return "?";
}

ControllerChoice controller_from_string(const std::string& s) {
  if (s == "nzempc") return ControllerChoice::kNzempc;
  if (s == "rzempc") return ControllerChoice::kRzempc;
  if (s == "rzempc-center") return ControllerChoice::kRzempcCenter;
  throw ConfigError("unknown controller '" + s + "' (expected nzempc, rzempc or rzempc-center)");
}

FlueGasProfile FlueGasProfile::constant() { return {{{0.0, 1.0}}, {}}; }

FlueGasProfile FlueGasProfile::default_ramp() {
  return {{{0.0, 1.0}, {10.0, 1.05}, {30.0, 1.05}, {40.0, 0.95}, {60.0, 0.95}},
          {{"ramp_up", 0, 30}, {"ramp_down", 30, 60}}};
}

double FlueGasProfile::multiplier(int step) const {
  if (breakpoints.empty()) return 1.0;
  const double s = step;
  if (s <= breakpoints.front().first) return breakpoints.front().second;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const auto& [s1, m1] = breakpoints[i];
    if (s <= s1) {
      const auto& [s0, m0] = breakpoints[i - 1];
      return m0 + (m1 - m0) * (s - s0) / (s1 - s0);
    }
  }
  return breakpoints.back().second;
}

void FlueGasProfile::validate() const {
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i].second > 0)) throw ConfigError("flue-gas multiplier must be positive");
    if (i > 0 && !(breakpoints[i].first > breakpoints[i - 1].first))
      throw ConfigError("flue-gas breakpoints must be strictly increasing in step");
  }
  for (const Phase& p : phases)
    if (p.begin < 0 || p.end <= p.begin) throw ConfigError("phase '" + p.name + "' has an empty step range");
}

NoiseSource::NoiseSource(std::uint64_t seed, double bound) : engine_(seed), bound_(bound) {
  if (!(bound >= 0)) throw ConfigError("noise bound must be non-negative");
}

Vector NoiseSource::draw(int n) {
  Vector w(n);
  for (int i = 0; i < n; ++i) {
    // top 53 bits
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    w[i] = (2.0 * u - 1.0) * bound_;
  }
  if (bound_ > 0 && w.cwiseAbs().maxCoeff() > bound_) throw std::logic_error("noise sample exceeds its bound");
  return w;
}

void ScenarioConfig::validate() const {
  if (controllers.empty()) throw ConfigError("no controller selected");
  if (duration < 1) throw ConfigError("duration must be at least one step");
  if (!(noise_bound >= 0)) throw ConfigError("noise bound must be non-negative");
  if (!(violation_tolerance >= 0)) throw ConfigError("violation tolerance must be non-negative");
  if (initial_efficiency && !(*initial_efficiency > 0 && *initial_efficiency < 1))
    throw ConfigError("initial efficiency must lie in (0, 1)");
  profile.validate();
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.column.validate();
  cfg.boundary.validate();
  cfg.zone.validate();
  cfg.controller.validate();
  cfg.zone_mod.validate();
  cfg.scenario.validate();
  if (!(cfg.reference_flow_lo > 0 && cfg.reference_flow_lo < cfg.reference_flow_hi))
    throw ConfigError("invalid reference solvent-flow bracket");
  AbsorberModel model(cfg.column, cfg.boundary, std::make_shared<DefaultPropertyPackage>(cfg.properties));
  const double center = 0.5 * (cfg.zone.lower + cfg.zone.upper);
  SteadyStatePoint ref = steady_state_for_efficiency(model, center, cfg.reference_flow_lo, cfg.reference_flow_hi);
  Scaling scaling = Scaling::from_reference(ref.state, ref.solvent_flow);
  return {std::move(model), std::move(scaling), std::move(ref)};
}

SimResult run_scenario(const ExperimentConfig& cfg, ControllerChoice controller,
                       const std::optional<ModifiedZone>& modified_zone) {
  return run_scenario(cfg, prepare_experiment(cfg), controller, modified_zone);
}

SimResult run_scenario(const ExperimentConfig& cfg, const ExperimentSetup& setup, ControllerChoice choice,
                       const std::optional<ModifiedZone>& modified_zone) {
  const ScenarioConfig& sc = cfg.scenario;
  sc.validate();
  SimResult result;
  result.controller = to_string(choice);

  std::optional<ZoneController> ctrl;
  if (choice == ControllerChoice::kNzempc) {
    ctrl.emplace(setup.model, setup.scaling, cfg.zone, cfg.controller);
  } else {
    ModifiedZone mz;
    if (choice == ControllerChoice::kRzempc) {
      mz = modified_zone ? *modified_zone : modify_zone(cfg.zone, cfg.zone_mod, setup.model, setup.scaling);
      if (mz.empty()) throw DomainError("zone modification returned an empty set: " + mz.diagnostics);
    } else {
      mz = invariant_set_at(0.5 * (cfg.zone.lower + cfg.zone.upper), cfg.zone, cfg.zone_mod, setup.model,
                            setup.scaling);
    }
    ctrl.emplace(setup.model, setup.scaling, cfg.zone, cfg.controller, *mz.ellipsoid);
    result.modified_zone = std::move(mz);
  }

  // the controller must always predict with the nominal flue-gas flow
  const double nominal_gas = setup.model.boundary().gas.volumetric_flow;
  ctrl->set_model_observer([nominal_gas](double gas_flow) {
    if (gas_flow != nominal_gas) throw std::logic_error("controller model saw a perturbed flue-gas flow");
  });

  Vector x = setup.reference.state;
  if (sc.initial_efficiency && *sc.initial_efficiency != setup.reference.efficiency)
    x = steady_state_for_efficiency(setup.model, *sc.initial_efficiency, cfg.reference_flow_lo,
                                    cfg.reference_flow_hi)
            .state;

  NoiseSource noise(sc.seed, sc.noise_bound);
  const double delta = cfg.controller.sampling_time;
  for (int k = 0; k < sc.duration; ++k) {
    const double mult = sc.profile.multiplier(k);
    const Plant plant{mult == 1.0 ? setup.model : setup.model.with_gas_flow_multiplier(mult), setup.scaling,
                      cfg.controller.dt};
    const Vector w = noise.draw(static_cast<int>(x.size()));
    StepRecord step;
    try {
      step = receding_horizon_step(*ctrl, plant, x, w);
    } catch (const Error& e) {
      result.error = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
    SimRecord r;
    r.step = k;
    r.time_s = (k + 1) * delta;
    r.y = step.y;
    r.u = step.u;
    r.stage_cost = step.stage_cost;
    r.slack = step.slack;
    r.violation = zone_distance(step.y, cfg.zone) > sc.violation_tolerance;
    r.flow_multiplier = mult;
    r.fallback = step.fallback;
    r.clipped = step.clipped;
    result.records.push_back(r);
  }
  result.summary = metrics(result.records, sc.profile.phases);
  return result;
}

SimSummary metrics(const std::vector<SimRecord>& records, const std::vector<Phase>& phases) {
  SimSummary s;
  if (records.empty()) return s;
  double total = 0.0;
  for (const SimRecord& r : records) {
    total += r.stage_cost;
    if (s.first_entry_step < 0 && !r.violation) s.first_entry_step = r.step;
    if (r.violation) {
      if (s.first_entry_step < 0)
        ++s.pre_entry_violations;
      else
        ++s.violations;
    }
    s.fallbacks += r.fallback ? 1 : 0;
    s.clipped += r.clipped;
  }
  s.average_cost = total / static_cast<double>(records.size());
  for (const Phase& p : phases) {
    double sum = 0.0;
    int n = 0;
    for (const SimRecord& r : records)
      if (r.step >= p.begin && r.step < p.end) {
        sum += r.stage_cost;
        ++n;
      }
    s.phase_costs.emplace_back(p.name, n ? sum / n : std::nan(""));
  }
  return s;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  return out;
}

void write_trace(const SimResult& r, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "step,time_s,y,u,stage_cost,slack,violation,flow_multiplier,fallback,clipped\n";
  for (const SimRecord& s : r.records)
    out << s.step << ',' << fmt(s.time_s) << ',' << fmt(s.y) << ',' << fmt(s.u) << ',' << fmt(s.stage_cost) << ','
        << fmt(s.slack) << ',' << (s.violation ? 1 : 0) << ',' << fmt(s.flow_multiplier) << ','
        << (s.fallback ? 1 : 0) << ',' << s.clipped << '\n';
}

void write_summary(const std::vector<const SimResult*>& results, const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "controller";
  const auto& phases = results.front()->summary.phase_costs;
  for (const auto& [name, cost] : phases) out << ',' << name << "_cost";
  out << ",average_cost,violations,first_entry_step,pre_entry_violations,fallbacks,clipped,steps,zone_lo,zone_hi,"
         "error\n";
  for (const SimResult* r : results) {
    const SimSummary& s = r->summary;
    out << r->controller;
    for (const auto& [name, cost] : s.phase_costs) out << ',' << fmt(cost);
    out << ',' << fmt(s.average_cost) << ',' << s.violations << ',' << s.first_entry_step << ','
        << s.pre_entry_violations << ',' << s.fallbacks << ',' << s.clipped << ',' << r->records.size();
    if (r->modified_zone)
      out << ',' << fmt(r->modified_zone->y_lo) << ',' << fmt(r->modified_zone->y_hi);
    else
      out << ",,";
    std::string err = r->error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << ',' << err << '\n';
  }
}

void write_plot(const std::vector<std::pair<std::string, std::string>>& traces, const ZoneSpec& zone,
                const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "set datafile separator ','\n"
      << "set terminal pngcairo size 1000,800\n"
      << "set output 'closed_loop.png'\n"
      << "set multiplot layout 3,1\n"
      << "set xlabel 'time [s]'\n"
      << "set ylabel 'CO2 capture efficiency'\n"
      << "set arrow from graph 0, first " << fmt(zone.lower) << " to graph 1, first " << fmt(zone.lower)
      << " nohead dt 2\n"
      << "set arrow from graph 0, first " << fmt(zone.upper) << " to graph 1, first " << fmt(zone.upper)
      << " nohead dt 2\n";
  const auto plot = [&](int column) {
    out << "plot ";
    for (std::size_t i = 0; i < traces.size(); ++i)
      out << (i ? ", " : "") << "'" << traces[i].second << "' using 2:" << column << " every ::1 with lines title '"
          << traces[i].first << "'";
    out << '\n';
  };
  plot(3);
  out << "unset arrow\nset ylabel 'solvent flow [m3/s]'\n";
  plot(4);
  out << "set ylabel 'stage cost'\n";
  plot(5);
  out << "unset multiplot\n";
}

}  // namespace

void export_result(const SimResult& result, const std::filesystem::path& dir, const ZoneSpec& zone) {
  std::filesystem::create_directories(dir);
  write_trace(result, dir / "trace.csv");
  write_summary({&result}, dir / "summary.csv");
  write_plot({{result.controller, "trace.csv"}}, zone, dir / "plot.gp");
}

void export_comparison(const std::vector<SimResult>& results, const std::filesystem::path& dir, const ZoneSpec& zone) {
  if (results.empty()) throw ConfigError("nothing to export");
  if (results.size() == 1) return export_result(results.front(), dir, zone);
  std::filesystem::create_directories(dir);
  std::vector<const SimResult*> ptrs;
  std::vector<std::pair<std::string, std::string>> traces;
  for (const SimResult& r : results) {
    export_result(r, dir / r.controller, zone);
    ptrs.push_back(&r);
    traces.emplace_back(r.controller, r.controller + "/trace.csv");
  }
  write_summary(ptrs, dir / "summary.csv");
  write_plot(traces, zone, dir / "plot.gp");
}

std::vector<SimRecord> read_trace(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  std::vector<SimRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[10];
    for (auto& s : f) std::getline(ss, s, ',');
    SimRecord r;
    r.step = std::stoi(f[0]);
    r.time_s = std::stod(f[1]);
    r.y = std::stod(f[2]);
    r.u = std::stod(f[3]);
    r.stage_cost = std::stod(f[4]);
    r.slack = std::stod(f[5]);
    r.violation = f[6] == "1";
    r.flow_multiplier = std::stod(f[7]);
    r.fallback = f[8] == "1";
    r.clipped = std::stoi(f[9]);
    out.push_back(r);
  }
  return out;
}

}  // namespace zempc
