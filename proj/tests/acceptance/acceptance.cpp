// Acceptance criteria AC1-AC8: one PASS/FAIL line each, exit status 1 if any fails.
// Closed-loop traces are kept under --workdir for inspection.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "zempc/error.hpp"
#include "zempc/numerics/lmi.hpp"
#include "zempc/numerics/lyapunov.hpp"
#include "zempc/zone_mod.hpp"

using namespace zempc;
using namespace zempc::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_workdir;

const ModifiedZone& default_modified_zone() {
  static const ModifiedZone mz =
      modify_zone(default_config().zone, default_config().zone_mod, default_setup().model, default_setup().scaling);
  return mz;
}

Outcome ac1_conservation() {
  const ExperimentSetup& s = default_setup();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> flow(1e-4, 3e-3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i)
    worst = std::max(worst, worst_transfer_imbalance(s.model, random_state(rng, s.reference.state), flow(rng)));
  double closure = 0.0;
  for (double u : {3e-4, 5.4e-4, 1e-3, 2e-3}) {
    const Vector x = steady_state(s.model, u);
    const Co2Balance b = s.model.co2_balance(x, u);
    closure = std::max(closure, std::abs(b.total_in() - b.total_out()) / b.total_in());
  }
  const bool ok = worst <= 8 * std::numeric_limits<double>::epsilon() && closure <= 1e-6;
  return {ok, format("transfer imbalance %.2e (1000 states), CO2 closure %.2e", worst, closure)};
}

Outcome ac2_numerics() {
  std::mt19937_64 rng(2);
  double lyap = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Matrix A = random_stable(rng, 50, 0.1 + 0.3 * t);
    const Matrix R = random_matrix(rng, 50, 50);
    const Matrix Q = 0.5 * (R + R.transpose());
    lyap = std::max(lyap, lyapunov_residual(A, solve_lyapunov(A, Q), Q) / Q.norm());
  }

  double rk4 = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Matrix A = random_symmetric_stable(rng, 8, -0.3, -1e-3);
    const Vector B = random_matrix(rng, 8, 1);
    Vector x = random_matrix(rng, 8, 1);
    Rk4Stepper stepper(8);
    for (double u : {0.7, -0.4, 1.3}) {
      const Vector exact = exact_zoh_step(A, B, x, u, 600.0);
      stepper.advance(linear_rhs(A, B), x, u, 600.0, 1.0);
      rk4 = std::max(rk4, (x - exact).cwiseAbs().maxCoeff() / exact.cwiseAbs().maxCoeff());
    }
  }
  {
    const ExperimentSetup& s = default_setup();
    const LinearModel lin = linearize_scaled(s.model, s.scaling, s.reference.state, s.reference.solvent_flow);
    Vector x = 0.01 * random_matrix(rng, 50, 1);
    const Vector exact = exact_zoh_step(lin.A, lin.B.col(0), x, 0.1, 600.0);
    Rk4Stepper stepper(50);
    stepper.advance(linear_rhs(lin.A, lin.B.col(0)), x, 0.1, 600.0, 1.0);
    rk4 = std::max(rk4, (x - exact).cwiseAbs().maxCoeff() / exact.cwiseAbs().maxCoeff());
  }

  double kkt = 0.0, oracle = 0.0;
  bool all_converged = true;
  for (int t = 0; t < 20; ++t) {
    const ConvexProblem p = random_convex(rng, t < 4 ? 20 : 2 + t % 7, t % 2 ? 1.0 : 0.0);
    const Vector ref = projected_gradient(p);
    for (bool exact : {true, false}) {
      const double tol = exact ? 1e-9 : 1e-8;
      const OcpSolution sol = solve_nlp(as_nlp(p, exact), SqpOptions{tol, 200, 1e-6, 1e3, std::nullopt});
      all_converged = all_converged && sol.status == SolveStatus::kConverged;
      kkt = std::max(kkt, sol.kkt_residual);
      oracle = std::max(oracle, (sol.z - ref).cwiseAbs().maxCoeff());
    }
  }
  const bool ok = lyap <= 1e-8 && rk4 <= 1e-6 && all_converged && kkt <= 1e-6 && oracle <= 1e-6;
  return {ok, format("Lyapunov residual %.2e |Q|, RK4 vs expm %.2e per interval, SQP KKT %.2e, oracle gap %.2e%s", lyap,
                     rk4, kkt, oracle, all_converged ? "" : ", some SQP runs did not converge")};
}

Outcome ac3_invariance() {
  const ModifiedZone& mz = default_modified_zone();
  if (mz.empty()) return {false, "no modified zone: " + mz.diagnostics};
  const ExperimentSetup& s = default_setup();

  // Lyapunov ellipsoid with Q = I, shape recomputed here, level from the construction
  const LinearModel lin = linearize_scaled(s.model, s.scaling, mz.x_s, mz.u_s);
  if (!is_hurwitz(lin.A)) return {false, "linearization is not Hurwitz"};
  const Matrix M = solve_lyapunov(lin.A.transpose(), Matrix::Identity(50, 50));
  const Ellipsoid e(s.scaling.scale(mz.x_s), M, mz.ellipsoid->level());
  const Eigen::LLT<Matrix> llt(M);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  double worst_rate = -1e300;
  for (int k = 0; k < 20; ++k) {
    Vector v(50);
    for (auto& c : v) c = nd(rng);
    v.normalize();
    const Vector d = std::sqrt(e.level()) * llt.matrixU().solve(v);
    worst_rate = std::max(worst_rate, 2.0 * d.dot(M * (lin.A * d)));
  }

  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const double u_max = 1.0;
  const InvarianceSdpResult r = solve_invariance_sdp(A, B, u_max);
  const Matrix L = r.P.llt().matrixL();
  double worst_input = 0.0;
  for (int k = 0; k < 720; ++k) {
    const double th = 2 * M_PI * k / 720;
    Vector v(2);
    v << std::cos(th), std::sin(th);
    worst_input = std::max(worst_input, std::abs((r.K * (L * v))(0)));
  }
  const double shape_gap = (M - mz.ellipsoid->shape()).norm() / M.norm();
  const bool ok = worst_rate < 0 && shape_gap <= 1e-8 && mz.ellipsoid->level() <= default_config().zone_mod.alpha && r.lyapunov_certificate <= -1e-9 && r.schur_certificate >= -1e-9 &&
                  worst_input <= u_max * (1 + 1e-6) && is_hurwitz(A + B * r.K);
  return {ok, format("max dV/dt on 20 boundary points %.3e, shape gap %.1e; SDP certificates %.2e / %.2e, max |Kx| %.6f", worst_rate,
                     shape_gap, r.lyapunov_certificate, r.schur_certificate, worst_input)};
}

Outcome ac4_zone_modification() {
  const ModifiedZone& mz = default_modified_zone();
  const ZoneModParams& p = default_config().zone_mod;
  if (mz.empty()) return {false, "default parameters gave an empty zone: " + mz.diagnostics};
  const bool inside = mz.y_lo - p.epsilon >= 0.85 && mz.y_hi + p.epsilon <= 0.90;
  ZoneModParams bad = p;
  bad.epsilon = 0.05;
  const ModifiedZone e = modify_zone(default_config().zone, bad, default_setup().model, default_setup().scaling);
  const bool ok = inside && e.empty() && e.iterations <= bad.n_max;
  return {ok, format("[%.5f, %.5f] after %d iteration(s); epsilon 0.05 gives %s after %d", mz.y_lo, mz.y_hi,
                     mz.iterations, e.empty() ? "empty" : "NON-EMPTY", e.iterations)};
}

SimResult run_saved(const ExperimentConfig& cfg, ControllerChoice c, const std::string& tag) {
  SimResult r = run_scenario(cfg, default_setup(), c, c == ControllerChoice::kRzempc
                                                          ? std::optional<ModifiedZone>(default_modified_zone())
                                                          : std::nullopt);
  export_result(r, g_workdir / tag / r.controller, cfg.zone);
  return r;
}

Outcome ac5_noise_ordering() {
  if (default_modified_zone().empty()) return {false, "no modified zone"};
  const ControllerChoice order[] = {ControllerChoice::kRzempc, ControllerChoice::kRzempcCenter,
                                    ControllerChoice::kNzempc};
  double mean[3] = {0, 0, 0};
  int viol[3] = {0, 0, 0};
  std::string errors;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig cfg = default_config();
    cfg.scenario.duration = 100;
    cfg.scenario.noise_bound = 1e-5;
    cfg.scenario.seed = seed;
    for (int i = 0; i < 3; ++i) {
      const SimResult r = run_saved(cfg, order[i], "ac5_seed" + std::to_string(seed));
      if (!r.error.empty()) errors += " " + r.controller + ": " + r.error;
      mean[i] += r.summary.average_cost / 3.0;
      viol[i] += r.summary.violations;
    }
  }
  const bool ok = errors.empty() && mean[0] < mean[1] && mean[1] < mean[2] && viol[0] == 0 && viol[2] >= 1;
  return {ok, format("mean cost rzempc %.5f < rzempc-center %.5f < nzempc %.5f; violations %d / %d / %d", mean[0],
                     mean[1], mean[2], viol[0], viol[1], viol[2]) +
                  errors};
}

double phase(const SimResult& r, const std::string& name) {
  for (const auto& [n, c] : r.summary.phase_costs)
    if (n == name) return c;
  return std::nan("");
}

Outcome ac6_ramp_pattern() {
  if (default_modified_zone().empty()) return {false, "no modified zone"};
  ExperimentConfig cfg = default_config();
  cfg.scenario.profile = FlueGasProfile::default_ramp();
  cfg.scenario.duration = cfg.scenario.profile.phases.back().end;
  cfg.scenario.noise_bound = 0.0;
  const SimResult nz = run_saved(cfg, ControllerChoice::kNzempc, "ac6");
  const SimResult rz = run_saved(cfg, ControllerChoice::kRzempc, "ac6");
  const double nu = phase(nz, "ramp_up"), nd = phase(nz, "ramp_down");
  const double ru = phase(rz, "ramp_up"), rd = phase(rz, "ramp_down");
  const double spread = std::abs(ru - rd) / std::min(std::abs(ru), std::abs(rd));
  const bool ok = nz.error.empty() && rz.error.empty() && nu < ru && rd < nd &&
                  rz.summary.average_cost < nz.summary.average_cost && spread < 0.15;
  return {ok, format("up %.5f (nzempc) vs %.5f (rzempc), down %.5f vs %.5f, overall %.5f vs %.5f, rzempc phase spread "
                     "%.1f%%",
                     nu, ru, nd, rd, nz.summary.average_cost, rz.summary.average_cost, 100 * spread) +
                  (nz.error + rz.error)};
}

Outcome ac7_startup() {
  ExperimentConfig cfg = default_config();
  cfg.scenario.duration = 30;
  cfg.scenario.noise_bound = 0.0;
  cfg.scenario.initial_efficiency = 0.82;
  const SimResult r = run_saved(cfg, ControllerChoice::kNzempc, "ac7");
  if (!r.error.empty()) return {false, r.error};
  const SimSummary& s = r.summary;
  const double y_end = r.records.back().y;
  const bool ok = s.first_entry_step >= 0 && s.violations == 0 && std::abs(y_end - 0.90) <= 0.005;
  return {ok, format("enters the zone at step %d, %d violations afterwards, terminal y %.5f", s.first_entry_step,
                     s.violations, y_end)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac8_determinism() {
  ExperimentConfig cfg = default_config();
  cfg.scenario.duration = 3;
  cfg.scenario.seed = 77;
  cfg.scenario.profile = FlueGasProfile::default_ramp();
  bool same = true;
  std::string detail;
  for (ControllerChoice c : {ControllerChoice::kNzempc, ControllerChoice::kRzempc}) {
    const SimResult a = run_scenario(cfg, default_setup(), c, c == ControllerChoice::kRzempc
                                                                  ? std::optional(default_modified_zone())
                                                                  : std::nullopt);
    // second run from scratch: fresh setup and fresh zone construction
    const SimResult b = run_scenario(cfg, c);
    export_result(a, g_workdir / "ac8_a" / a.controller, cfg.zone);
    export_result(b, g_workdir / "ac8_b" / b.controller, cfg.zone);
    const bool eq = slurp(g_workdir / "ac8_a" / a.controller / "trace.csv") ==
                    slurp(g_workdir / "ac8_b" / b.controller / "trace.csv");
    same = same && eq && a.records.size() == 3;
    detail += " " + a.controller + (eq ? " identical" : " DIFFERENT");
  }
  return {same, "repeated 3-step runs, seed 77:" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string workdir = "acceptance_runs";
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "Directory for closed-loop traces");
  app.add_option("--only", only, "Run only these criteria (AC1 ... AC8)");
  CLI11_PARSE(app, argc, argv);
  g_workdir = workdir;
  fs::create_directories(g_workdir);

  const std::vector<std::tuple<std::string, std::string, double, std::function<Outcome()>>> criteria = {
      {"AC1", "conservation", 60, ac1_conservation},
      {"AC2", "numerics", 300, ac2_numerics},
      {"AC3", "invariance", 60, ac3_invariance},
      {"AC4", "zone modification", 300, ac4_zone_modification},
      {"AC5", "noise ordering", 1800, ac5_noise_ordering},
      {"AC6", "ramp pattern", 1800, ac6_ramp_pattern},
      {"AC7", "nominal zone tracking", 600, ac7_startup},
      {"AC8", "determinism", 600, ac8_determinism},
  };
  const std::set<std::string> selected(only.begin(), only.end());

  // shared fixtures are built up front so they do not count against one criterion's budget
  const auto t_setup = std::chrono::steady_clock::now();
  default_setup();
  default_modified_zone();
  std::printf("setup %.1f s\n", std::chrono::duration<double>(std::chrono::steady_clock::now() - t_setup).count());
  std::fflush(stdout);

  int failed = 0;
  for (const auto& [id, name, budget, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget) {
      o.pass = false;
      o.detail += format(" (runtime over the %.0f s budget)", budget);
    }
    std::printf("%s %s %s: %s [%.1f s]\n", id.c_str(), o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
