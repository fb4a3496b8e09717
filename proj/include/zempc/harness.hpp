#pragma once
// Closed-loop experiments: noise, flue-gas load changes, metrics and export.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "zempc/column_model.hpp"
#include "zempc/zone_empc.hpp"
#include "zempc/zone_mod.hpp"

namespace zempc {

enum class ControllerChoice { kNzempc, kRzempc, kRzempcCenter };
std::string to_string(ControllerChoice c);
ControllerChoice controller_from_string(const std::string& s);

struct Phase {
  std::string name;
  int begin = 0;  // first step, inclusive
  int end = 0;    // exclusive
};

/// Piecewise-linear flue-gas flow multiplier over the step index.
struct FlueGasProfile {
  std::vector<std::pair<double, double>> breakpoints;  // (step, multiplier), sorted
  std::vector<Phase> phases;

  static FlueGasProfile constant();
  /// Up 5 % over 10 steps, hold, down to -5 % over 10 steps, hold.
  static FlueGasProfile default_ramp();

  double multiplier(int step) const;
  void validate() const;
};

/// Deterministic uniform noise in [-bound, bound] from a 64-bit Mersenne twister.
class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, double bound);
  Vector draw(int n);
  double bound() const { return bound_; }

 private:
  std::mt19937_64 engine_;
  double bound_;
};

struct ScenarioConfig {
  std::vector<ControllerChoice> controllers{ControllerChoice::kNzempc};
  int duration = 100;
  std::uint64_t seed = 1;
  double noise_bound = 1e-5;
  FlueGasProfile profile = FlueGasProfile::constant();
  std::optional<double> initial_efficiency;  // zone center when unset
  std::optional<std::string> modified_zone_file;
  double violation_tolerance = 1e-4;

  void validate() const;
};

/// Everything a closed-loop experiment needs.
struct ExperimentConfig {
  ColumnConfig column;
  StreamBoundary boundary;
  PropertyConstants properties;
  ZoneSpec zone;
  ControllerParams controller;
  ZoneModParams zone_mod;
  ScenarioConfig scenario;
  double reference_flow_lo = 2e-4;  // m3/s bracket for the scaling steady state
  double reference_flow_hi = 5e-3;
};

struct SimRecord {
  int step = 0;
  double time_s = 0.0;
  double y = 0.0;
  double u = 0.0;  // m3/s
  double stage_cost = 0.0;
  double slack = 0.0;
  bool violation = false;
  double flow_multiplier = 1.0;
  bool fallback = false;
  int clipped = 0;
};

struct SimSummary {
  double average_cost = 0.0;
  int violations = 0;            // after first entry
  int pre_entry_violations = 0;
  int first_entry_step = -1;
  int fallbacks = 0;
  int clipped = 0;
  std::vector<std::pair<std::string, double>> phase_costs;
};

struct SimResult {
  std::string controller;
  std::vector<SimRecord> records;
  SimSummary summary;
  std::optional<ModifiedZone> modified_zone;
  std::string error;  // set when the run aborted early
};

/// Nominal model, scaling and reference steady state shared by all runs.
struct ExperimentSetup {
  AbsorberModel model;
  Scaling scaling;
  SteadyStatePoint reference;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

/// Runs one controller. Throws on configuration errors; controller failures
/// beyond the fallback end the run and are reported in SimResult::error with
/// the records collected so far.
SimResult run_scenario(const ExperimentConfig& cfg, ControllerChoice controller,
                       const std::optional<ModifiedZone>& modified_zone = std::nullopt);
SimResult run_scenario(const ExperimentConfig& cfg, const ExperimentSetup& setup, ControllerChoice controller,
                       const std::optional<ModifiedZone>& modified_zone = std::nullopt);

SimSummary metrics(const std::vector<SimRecord>& records, const std::vector<Phase>& phases = {});

/// trace.csv, summary.csv and plot.gp in dir.
void export_result(const SimResult& result, const std::filesystem::path& dir, const ZoneSpec& zone);
/// One subdirectory per controller plus a combined summary.csv and overlay plot.gp.
void export_comparison(const std::vector<SimResult>& results, const std::filesystem::path& dir, const ZoneSpec& zone);

std::vector<SimRecord> read_trace(const std::filesystem::path& file);

}  // namespace zempc
