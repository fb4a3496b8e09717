#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "zempc/config.hpp"
#include "zempc/error.hpp"
#include "zempc/harness.hpp"
#include "zempc/numerics/lmi.hpp"
#include "zempc/numerics/lyapunov.hpp"
#include "zempc/zone_mod.hpp"

namespace py = pybind11;
using namespace zempc;

namespace {

// Config is passed as JSON text; None means defaults.
ExperimentConfig config_from(const std::optional<std::string>& json_text) {
  return json_text ? parse_experiment_config(*json_text) : parse_experiment_config("{}");
}

py::dict zone_dict(const ModifiedZone& mz) {
  py::dict d;
  d["empty"] = mz.empty();
  d["y_lo"] = mz.y_lo;
  d["y_hi"] = mz.y_hi;
  d["iterations"] = mz.iterations;
  d["relaxed_cost"] = mz.relaxed_cost;
  d["optimal_cost"] = mz.optimal_cost;
  d["level"] = mz.empty() ? 0.0 : mz.ellipsoid->level();
  d["path"] = to_string(mz.path);
  d["diagnostics"] = mz.diagnostics;
  d["json"] = modified_zone_to_json(mz);
  return d;
}

py::dict steady_state_py(double flow, const std::optional<std::string>& config) {
  if (!(flow > 0)) throw ConfigError("flow must be positive (m3/s)");
  const ExperimentConfig cfg = config_from(config);
  const AbsorberModel model(cfg.column, cfg.boundary, std::make_shared<DefaultPropertyPackage>(cfg.properties));
  Vector x;
  {
    py::gil_scoped_release release;
    x = steady_state(model, flow);
  }
  const Co2Balance bal = model.co2_balance(x, flow);
  py::dict d;
  d["flow"] = flow;
  d["efficiency"] = model.efficiency(x);
  d["residual"] = scaled_residual(x, model.rhs(x, flow));
  d["co2_in"] = bal.total_in();
  d["co2_out"] = bal.total_out();
  d["state"] = x;
  return d;
}

py::dict modify_zone_py(const std::optional<std::string>& config) {
  const ExperimentConfig cfg = config_from(config);
  ModifiedZone mz;
  {
    py::gil_scoped_release release;
    const ExperimentSetup setup = prepare_experiment(cfg);
    mz = modify_zone(cfg.zone, cfg.zone_mod, setup.model, setup.scaling);
  }
  return zone_dict(mz);
}

py::dict simulate_py(const std::string& controller, const std::optional<std::string>& config,
                     std::optional<int> duration, std::optional<std::uint64_t> seed,
                     std::optional<double> noise_bound, const std::optional<std::string>& out_dir) {
  ExperimentConfig cfg = config_from(config);
  if (duration) cfg.scenario.duration = *duration;
  if (seed) cfg.scenario.seed = *seed;
  if (noise_bound) cfg.scenario.noise_bound = *noise_bound;
  cfg.scenario.validate();
  const ControllerChoice choice = controller_from_string(controller);
  SimResult r;
  {
    py::gil_scoped_release release;
    std::optional<ModifiedZone> saved;
    if (choice == ControllerChoice::kRzempc && cfg.scenario.modified_zone_file)
      saved = load_modified_zone(*cfg.scenario.modified_zone_file);
    r = run_scenario(cfg, choice, saved);
    if (out_dir) export_result(r, *out_dir, cfg.zone);
  }

  const auto n = static_cast<Eigen::Index>(r.records.size());
  Vector y(n), u(n), cost(n), slack(n), mult(n);
  Eigen::VectorXi violation(n), fallback(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const SimRecord& rec = r.records[k];
    y[k] = rec.y;
    u[k] = rec.u;
    cost[k] = rec.stage_cost;
    slack[k] = rec.slack;
    mult[k] = rec.flow_multiplier;
    violation[k] = rec.violation;
    fallback[k] = rec.fallback;
  }
  py::dict summary;
  summary["average_cost"] = r.summary.average_cost;
  summary["violations"] = r.summary.violations;
  summary["pre_entry_violations"] = r.summary.pre_entry_violations;
  summary["first_entry_step"] = r.summary.first_entry_step;
  summary["fallbacks"] = r.summary.fallbacks;
  for (const auto& [name, c] : r.summary.phase_costs) summary[py::str(name + "_cost")] = c;

  py::dict d;
  d["controller"] = r.controller;
  d["y"] = y;
  d["u"] = u;
  d["stage_cost"] = cost;
  d["slack"] = slack;
  d["flow_multiplier"] = mult;
  d["violation"] = violation;
  d["fallback"] = fallback;
  d["summary"] = summary;
  d["error"] = r.error;
  if (r.modified_zone) d["modified_zone"] = zone_dict(*r.modified_zone);
  return d;
}

py::dict invariance_sdp_py(const Matrix& A, const Matrix& B, double u_max) {
  const InvarianceSdpResult r = solve_invariance_sdp(A, B, u_max);
  py::dict d;
  d["P"] = r.P;
  d["K"] = r.K;
  d["lyapunov_certificate"] = r.lyapunov_certificate;
  d["schur_certificate"] = r.schur_certificate;
  return d;
}

}  // namespace

PYBIND11_MODULE(zempc, m) {
  m.doc() = "Zone economic MPC for a CO2 absorption column";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("default_config", [] { return experiment_config_to_json(parse_experiment_config("{}")); },
        "Default experiment configuration as JSON text.");
  m.def("load_config", [](const std::string& path) { return experiment_config_to_json(load_experiment_config(path)); },
        py::arg("path"), "Reads a config file, fills defaults and returns the full JSON text.");
  m.def("steady_state", &steady_state_py, py::arg("flow"), py::arg("config") = py::none(),
        "Steady state at a solvent flow in m3/s.");
  m.def("efficiency_for_flow",
        [](double flow, const std::optional<std::string>& c) {
          return steady_state_py(flow, c)["efficiency"].cast<double>();
        },
        py::arg("flow"), py::arg("config") = py::none());
  m.def("modify_zone", &modify_zone_py, py::arg("config") = py::none());
  m.def("simulate", &simulate_py, py::arg("controller") = "nzempc", py::arg("config") = py::none(),
        py::arg("duration") = py::none(), py::arg("seed") = py::none(), py::arg("noise_bound") = py::none(),
        py::arg("out_dir") = py::none(), "Closed-loop run of one controller (nzempc, rzempc, rzempc-center).");

  m.def("stage_cost", [](double y, double lo, double hi, double c1) { return stage_cost(y, ZoneSpec{lo, hi, c1}); },
        py::arg("y"), py::arg("lower") = 0.85, py::arg("upper") = 0.90, py::arg("c1") = 10000.0);
  m.def("zone_penalty", [](double y, double lo, double hi, double c1) { return zone_penalty(y, ZoneSpec{lo, hi, c1}); },
        py::arg("y"), py::arg("lower") = 0.85, py::arg("upper") = 0.90, py::arg("c1") = 10000.0);

  m.def("solve_lyapunov", &solve_lyapunov, py::arg("A"), py::arg("Q"), "P with A P + P A^T + Q = 0.");
  m.def("lyapunov_residual", &lyapunov_residual, py::arg("A"), py::arg("P"), py::arg("Q"));
  m.def("invariance_sdp", &invariance_sdp_py, py::arg("A"), py::arg("B"), py::arg("u_max"));
}
