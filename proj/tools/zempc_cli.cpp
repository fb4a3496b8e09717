#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zempc/config.hpp"
#include "zempc/error.hpp"
#include "zempc/harness.hpp"

namespace fs = std::filesystem;
using namespace zempc;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << text << '\n';
}

int cmd_simulate(const std::string& config_file, const std::string& out_dir, std::optional<std::uint64_t> seed,
                 const std::vector<std::string>& controllers, std::optional<int> duration) {
  ExperimentConfig cfg = load_experiment_config(config_file);
  if (seed) cfg.scenario.seed = *seed;
  if (duration) cfg.scenario.duration = *duration;
  if (!controllers.empty()) {
    cfg.scenario.controllers.clear();
    for (const auto& c : controllers) cfg.scenario.controllers.push_back(controller_from_string(c));
  }
  cfg.scenario.validate();

  std::optional<ModifiedZone> saved;
  if (cfg.scenario.modified_zone_file) saved = load_modified_zone(*cfg.scenario.modified_zone_file);

  const ExperimentSetup setup = prepare_experiment(cfg);
  // one closed loop per job; jobs share only immutable data
  std::vector<std::future<SimResult>> jobs;
  for (ControllerChoice c : cfg.scenario.controllers)
    jobs.push_back(std::async(std::launch::async, [&cfg, &setup, &saved, c] {
      return run_scenario(cfg, setup, c, c == ControllerChoice::kRzempc ? saved : std::nullopt);
    }));
  std::vector<SimResult> results;
  for (auto& j : jobs) results.push_back(j.get());

  fs::create_directories(out_dir);
  export_comparison(results, out_dir, cfg.zone);
  write_text(fs::path(out_dir) / "config_used.json", experiment_config_to_json(cfg));

  int status = 0;
  for (const SimResult& r : results) {
    std::printf("%-14s average_cost=%.6f violations=%d first_entry=%d steps=%zu", r.controller.c_str(),
                r.summary.average_cost, r.summary.violations, r.summary.first_entry_step, r.records.size());
    for (const auto& [name, cost] : r.summary.phase_costs) std::printf(" %s=%.6f", name.c_str(), cost);
    std::printf("\n");
    if (!r.error.empty()) {
      std::fprintf(stderr, "%s aborted: %s\n", r.controller.c_str(), r.error.c_str());
      status = 1;
    }
  }
  return status;
}

int cmd_modify_zone(const std::string& config_file, const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment_config(config_file);
  const ExperimentSetup setup = prepare_experiment(cfg);
  const ModifiedZone mz = modify_zone(cfg.zone, cfg.zone_mod, setup.model, setup.scaling);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "modified_zone.json", modified_zone_to_json(mz));
  for (const ZoneModIteration& it : mz.log)
    std::printf("iteration %d: relaxed cost %.6f, %s, output range [%.5f, %.5f]%s%s\n", it.iteration,
                it.relaxed_cost, to_string(it.path).c_str(), it.y_lo, it.y_hi, it.accepted ? ", accepted" : "",
                it.note.empty() ? "" : (" (" + it.note + ")").c_str());
  if (mz.empty()) {
    std::fprintf(stderr, "no modified zone: %s\n", mz.diagnostics.c_str());
    return 3;
  }
  std::printf("modified zone [%.6f, %.6f] after %d iteration(s), level %.6g\n", mz.y_lo, mz.y_hi, mz.iterations,
              mz.ellipsoid->level());
  return 0;
}

int cmd_steady_state(const std::string& config_file, double flow) {
  const ExperimentConfig cfg = load_experiment_config(config_file);
  if (!(flow > 0)) throw ConfigError("--flow must be positive (m3/s)");
  const AbsorberModel model(cfg.column, cfg.boundary, std::make_shared<DefaultPropertyPackage>(cfg.properties));
  const Vector x = steady_state(model, flow);
  const Co2Balance bal = model.co2_balance(x, flow);
  std::printf("{\n  \"flow\": %.12g,\n  \"efficiency\": %.12g,\n  \"residual\": %.3e,\n", flow, model.efficiency(x),
              scaled_residual(x, model.rhs(x, flow)));
  std::printf("  \"co2_in\": %.12g,\n  \"co2_out\": %.12g,\n  \"state\": [", bal.total_in(), bal.total_out());
  for (Eigen::Index i = 0; i < x.size(); ++i) std::printf("%s%.12g", i ? ", " : "", x[i]);
  std::printf("]\n}\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zone-tracking economic MPC for a CO2 absorber"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> duration;
  std::vector<std::string> controllers;
  auto* sim = app.add_subcommand("simulate", "Run closed-loop scenarios and write traces");
  sim->add_option("--config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the noise seed");
  sim->add_option("--controller", controllers, "Override the controller list (nzempc, rzempc, rzempc-center)");
  sim->add_option("--duration", duration, "Override the number of steps");

  auto* mod = app.add_subcommand("modify-zone", "Compute the modified target zone");
  mod->add_option("--config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
  mod->add_option("--out", out, "Output directory")->required();

  double flow = 0.0;
  auto* ss = app.add_subcommand("steady-state", "Steady state at a fixed solvent flow");
  ss->add_option("--flow", flow, "Lean solvent flow, m3/s")->required();
  ss->add_option("--config", config, "Configuration (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(config, out, seed, controllers, duration);
    if (*mod) return cmd_modify_zone(config, out);
    if (*ss) return cmd_steady_state(config, flow);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
