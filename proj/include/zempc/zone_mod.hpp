#pragma once
// Construction of a modified target zone: an ellipsoidal invariant set around
// a cost-relaxed steady state whose projected output range, enlarged by
// epsilon, fits inside the original zone.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zempc/column_model.hpp"
#include "zempc/numerics/linalg.hpp"
#include "zempc/numerics/lmi.hpp"
#include "zempc/zone_empc.hpp"

namespace zempc {

enum class SetPath { kLyapunov, kSdp };
enum class ProjectionMode {
  kEquilibrium,  // output range over the set's steady states (default)
  kFullSupport,  // support function of the output over the whole set
};

std::string to_string(SetPath p);
std::string to_string(ProjectionMode p);
ProjectionMode projection_mode_from_string(const std::string& s);

struct ZoneModParams {
  double epsilon = 0.009;
  double r = -0.005;
  int n_max = 10;
  double alpha = 5.0;
  double u_max = 0.2;          // scaled input deviation admitted on the set
  double input_lower = 0.2;    // scaled admissible inputs for steady-state searches
  double input_upper = 3.0;
  ProjectionMode projection = ProjectionMode::kEquilibrium;
  SdpOptions sdp;

  void validate() const;
};

struct SteadyStateTarget {
  double cost = 0.0;  // -y
  Vector x_s;         // physical
  double u_s = 0.0;   // physical
};

struct ZoneModIteration {
  int iteration = 0;
  double relaxed_cost = 0.0;
  SetPath path = SetPath::kLyapunov;
  double level = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
  bool accepted = false;
  std::string note;
};

struct ModifiedZone {
  std::optional<Ellipsoid> ellipsoid;  // scaled coordinates
  double y_lo = 0.0;
  double y_hi = 0.0;
  int iterations = 0;
  double relaxed_cost = 0.0;
  double optimal_cost = 0.0;
  Vector x_s;        // physical steady state at the center
  double u_s = 0.0;  // physical
  SetPath path = SetPath::kLyapunov;
  std::string diagnostics;
  std::vector<ZoneModIteration> log;

  bool empty() const { return !ellipsoid.has_value(); }
};

/// Best steady-state economic cost inside the zone (highest reachable y).
SteadyStateTarget optimal_ss_cost(const ZoneSpec& zone, const AbsorberModel& model, const Scaling& scaling,
                                  const ZoneModParams& params = {});

/// (1 + r) * cost.
double relax_cost(double cost, double r);

/// Steady state with -y = relaxed_cost.
SteadyStateTarget crss(double relaxed_cost, const AbsorberModel& model, const Scaling& scaling,
                       const ZoneModParams& params = {});

/// Jacobians in scaled coordinates at a physical steady state.
LinearModel linearize_scaled(const AbsorberModel& model, const Scaling& scaling, const Vector& x_s, double u_s);

/// Gradient of the efficiency with respect to the scaled state.
Vector output_gradient(const AbsorberModel& model, const Scaling& scaling, const Vector& x_s);

/// [y_s - w, y_s + w], w = sqrt(level * g^T M^{-1} g).
std::pair<double, double> project_to_output(const Ellipsoid& set, const Vector& g, double y_s);

/// Output range over the steady states of the linear model that lie in the
/// set (x = -A^{-1} B du), with |du| additionally limited by u_max.
std::pair<double, double> project_equilibria(const Ellipsoid& set, const LinearModel& lin, const Vector& g,
                                             double y_s, double u_max);

/// [y_lo - eps, y_hi + eps] inside [zone.lower, zone.upper].
bool stop_criterion(double y_lo, double y_hi, double epsilon, const ZoneSpec& zone);

/// The iterative construction. Returns an empty ModifiedZone (with diagnostics)
/// when no admissible set is found within n_max iterations.
ModifiedZone modify_zone(const ZoneSpec& zone, const ZoneModParams& params, const AbsorberModel& model,
                         const Scaling& scaling);

/// Same set construction at the steady state with -cost = y (no iteration and
/// no stopping test). Used for the zone-center comparison controller.
ModifiedZone invariant_set_at(double y_target, const ZoneSpec& zone, const ZoneModParams& params,
                              const AbsorberModel& model, const Scaling& scaling);

}  // namespace zempc
