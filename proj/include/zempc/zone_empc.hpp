#pragma once
// Economic zone-tracking MPC for the absorber.
//
// NZEMPC tracks the output zone directly. RZEMPC tracks an ellipsoidal set in
// scaled state space with one non-negative slack per sampling interval.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zempc/column_model.hpp"
#include "zempc/numerics/linalg.hpp"
#include "zempc/numerics/sqp.hpp"

namespace zempc {

struct ZoneSpec {
  double lower = 0.85;
  double upper = 0.90;
  double c1 = 10000.0;

  void validate() const;
  bool contains(double y) const { return y >= lower && y <= upper; }
};

/// Distance from y to [lower, upper].
double zone_distance(double y, const ZoneSpec& zone);
/// c1 * dist(y, zone)^2, the closed form of the inner minimization over y_z.
double zone_penalty(double y, const ZoneSpec& zone);
/// -y + zone_penalty(y, zone).
double stage_cost(double y, const ZoneSpec& zone);

struct ControllerParams {
  int horizon = 10;
  double sampling_time = 600.0;  // s
  double dt = 1.0;               // s
  double u_min = 0.2;            // scaled
  double u_max = 3.0;            // scaled
  double y_min = 0.0;
  double y_max = 1.0;
  double fd_step = 1e-5;          // scaled-input central-difference step
  double accept_kkt = 1e-3;       // max-iter solutions below this are applied with a warning
  SqpOptions sqp{1e-6, 60, 1e-6, 1e3, std::nullopt};

  void validate() const;
};

enum class ControllerKind { kNominal, kRobust };

/// Result of one OCP solve.
struct ZoneOcpSolution {
  OcpSolution nlp;
  Vector inputs;                      // scaled, length N
  Vector slacks;                      // RZEMPC slacks, or zone distances for NZEMPC
  Vector predicted_y;                 // y at the end of each interval, length N
  Vector predicted_quadratic_form;    // RZEMPC only
  std::vector<Vector> predicted_states;  // physical, N + 1 entries including x_k
  bool state_bounds_ok = true;
  bool fallback = false;
  bool warning = false;
  std::string message;
};

/// One controller instance drives one closed loop. Not shareable mid-solve.
class ZoneController {
 public:
  /// NZEMPC on `zone`.
  ZoneController(AbsorberModel model, Scaling scaling, ZoneSpec zone, ControllerParams params);
  /// RZEMPC tracking `set` (scaled coordinates). `zone` is kept for logging only.
  ZoneController(AbsorberModel model, Scaling scaling, ZoneSpec zone, ControllerParams params, Ellipsoid set);

  ControllerKind kind() const { return kind_; }
  const AbsorberModel& model() const { return model_; }
  const Scaling& scaling() const { return scaling_; }
  const ZoneSpec& zone() const { return zone_; }
  const ControllerParams& params() const { return params_; }
  const std::optional<Ellipsoid>& tracked_set() const { return set_; }

  /// Solves the OCP at physical state x. Uses the stored warm start unless `cold`.
  /// Throws SolverError if the NLP fails outright.
  ZoneOcpSolution solve(const Vector& x, bool cold = false);

  /// solve() plus the fallback policy: on failure apply the previous plan
  /// shifted by one interval and flag the step.
  ZoneOcpSolution control(const Vector& x);

  /// Predicted efficiencies and physical states for scaled inputs v from x.
  void predict(const Vector& x, const Vector& v, Vector& y, std::vector<Vector>& states) const;

  void reset_warm_start();
  /// Called with the controller model's gas flow on every prediction.
  void set_model_observer(std::function<void(double gas_flow)> observer) { observer_ = std::move(observer); }

 private:
  ZoneOcpSolution solve_impl(const Vector& x, const Vector& z0, const std::optional<Matrix>& hessian);
  void simulate_from(const Vector& x_start, const Vector& v, int first, std::vector<Vector>& states) const;
  Vector shifted_plan() const;

  AbsorberModel model_;
  Scaling scaling_;
  ZoneSpec zone_;
  ControllerParams params_;
  ControllerKind kind_;
  std::optional<Ellipsoid> set_;
  Vector set_center_scaled_;

  Vector last_z_;
  std::optional<Matrix> last_hessian_;
  std::function<void(double)> observer_;
};

/// The true plant: possibly different gas flow from the controller model.
struct Plant {
  AbsorberModel model;
  Scaling scaling;
  double dt = 1.0;
};

struct StepRecord {
  double u = 0.0;         // applied solvent flow, m3/s
  double u_scaled = 0.0;
  double y = 0.0;         // efficiency after the interval
  double stage_cost = 0.0;  // against the controller's original zone
  double slack = 0.0;
  bool fallback = false;
  bool warning = false;
  int clipped = 0;        // negative concentrations clipped in the plant
  int sqp_iterations = 0;
  double kkt_residual = 0.0;
  std::string status;
};

/// Solves at the plant state, applies the first input for one sampling
/// interval with additive noise w (scaled, held over the interval) in the
/// plant derivative, and advances plant_state in place.
StepRecord receding_horizon_step(ZoneController& controller, const Plant& plant, Vector& plant_state,
                                 const Vector& noise);

/// Advances the plant one interval at constant solvent flow with held noise.
/// Negative concentrations are clipped to zero; returns the clip count.
int advance_plant(const Plant& plant, Vector& state, double solvent_flow, const Vector& noise, double duration);

}  // namespace zempc
