#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "zempc/error.hpp"
#include "zempc/numerics/integrate.hpp"
#include "zempc/zone_mod.hpp"

using namespace zempc;
using zempc::testing::default_config;
using zempc::testing::default_setup;

namespace {

const ModifiedZone& default_modified_zone() {
  static const ModifiedZone mz =
      modify_zone(default_config().zone, default_config().zone_mod, default_setup().model, default_setup().scaling);
  return mz;
}

ZoneController nominal(double c1 = 1e4) {
  ZoneSpec z = default_config().zone;
  z.c1 = c1;
  return ZoneController(default_setup().model, default_setup().scaling, z, default_config().controller);
}

ZoneController robust() {
  return ZoneController(default_setup().model, default_setup().scaling, default_config().zone,
                        default_config().controller, *default_modified_zone().ellipsoid);
}

// Constraint values recomputed from the returned inputs, independently of the solver.
void expect_consistent(const ZoneController& ctl, const Vector& x, const ZoneOcpSolution& sol) {
  const ControllerParams& p = ctl.params();
  ASSERT_EQ(sol.inputs.size(), p.horizon);
  EXPECT_GE(sol.inputs.minCoeff(), p.u_min - 1e-12);
  EXPECT_LE(sol.inputs.maxCoeff(), p.u_max + 1e-12);
  Vector y;
  std::vector<Vector> states;
  ctl.predict(x, sol.inputs, y, states);
  EXPECT_LE((y - sol.predicted_y).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(y.minCoeff(), p.y_min - 1e-6);
  EXPECT_LE(y.maxCoeff(), p.y_max + 1e-6);
  if (ctl.kind() == ControllerKind::kRobust) {
    const Ellipsoid& set = *ctl.tracked_set();
    for (int k = 0; k < p.horizon; ++k) {
      const double q = set.quadratic_form(ctl.scaling().scale(states[k + 1]));
      EXPECT_LE(q - set.level() - sol.slacks[k], 1e-6) << "interval " << k;
      EXPECT_GE(sol.slacks[k], 0.0);
    }
  }
}

}  // namespace

TEST(ZoneCost, PenaltyExamples) {
  const ZoneSpec z{0.85, 0.90, 1e4};
  EXPECT_EQ(zone_distance(0.87, z), 0.0);
  EXPECT_EQ(zone_distance(0.85, z), 0.0);
  EXPECT_EQ(zone_distance(0.90, z), 0.0);
  EXPECT_NEAR(zone_distance(0.91, z), 0.01, 1e-15);
  EXPECT_NEAR(zone_distance(0.80, z), 0.05, 1e-15);
  EXPECT_NEAR(zone_penalty(0.91, z), 1.0, 1e-10);
  EXPECT_NEAR(zone_penalty(0.84, z), 1.0, 1e-10);
  EXPECT_EQ(zone_penalty(0.88, z), 0.0);
  EXPECT_NEAR(stage_cost(0.88, z), -0.88, 1e-15);
  EXPECT_NEAR(stage_cost(0.92, z), -0.92 + 4.0, 1e-10);
}

// The penalty is the closed form of min over y_z in the zone of c1 (y - y_z)^2.
TEST(ZoneCost, PenaltyMatchesInnerMinimizationOnGrid) {
  const ZoneSpec z{0.85, 0.90, 1e4};
  for (double y = 0.7; y <= 1.0; y += 0.0137) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100000; ++i) {
      const double yz = z.lower + (z.upper - z.lower) * i / 100000.0;
      best = std::min(best, z.c1 * (y - yz) * (y - yz));
    }
    EXPECT_NEAR(zone_penalty(y, z), best, 1e-8) << "y " << y;
  }
}

TEST(ZoneCost, Validation) {
  EXPECT_THROW((ZoneSpec{0.9, 0.85, 1.0}.validate()), ConfigError);
  EXPECT_THROW((ZoneSpec{0.85, 1.2, 1.0}.validate()), ConfigError);
  EXPECT_THROW((ZoneSpec{0.85, 0.9, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((ZoneSpec{0.85, 0.85, 0.0}.validate()));
  ControllerParams p;
  p.horizon = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = ControllerParams{};
  p.sampling_time = 600.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = ControllerParams{};
  p.u_min = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Nzempc, SolutionIsConsistent) {
  ZoneController ctl = nominal();
  const Vector& x = default_setup().reference.state;
  const ZoneOcpSolution sol = ctl.solve(x);
  EXPECT_EQ(sol.nlp.status, SolveStatus::kConverged) << sol.message;
  EXPECT_LE(sol.nlp.kkt_residual, 1e-6);
  expect_consistent(ctl, x, sol);
  // economic pull toward the upper boundary, penalty keeps it close
  EXPECT_GT(sol.predicted_y[ctl.params().horizon - 1], 0.89);
  EXPECT_LT(sol.predicted_y.maxCoeff(), 0.905);
}

TEST(Nzempc, ZeroPenaltyNeverUsesLessSolvent) {
  ZoneController with_penalty = nominal(1e4);
  ZoneController without = nominal(0.0);
  const Vector& x = default_setup().reference.state;
  const ZoneOcpSolution a = with_penalty.solve(x), b = without.solve(x);
  EXPECT_GE(b.inputs[0], a.inputs[0] - 1e-9);
  EXPECT_GE(b.predicted_y.maxCoeff(), a.predicted_y.maxCoeff() - 1e-9);
}

TEST(Nzempc, WarmAndColdStartsAgree) {
  ZoneController ctl = nominal();
  const Vector& x = default_setup().reference.state;
  const ZoneOcpSolution first = ctl.control(x);
  ASSERT_FALSE(first.fallback);
  const ZoneOcpSolution warm = ctl.solve(x), cold = ctl.solve(x, true);
  EXPECT_NEAR(warm.inputs[0], cold.inputs[0], 1e-5);
  EXPECT_NEAR(warm.nlp.objective, cold.nlp.objective, 1e-6);
}

TEST(Nzempc, Deterministic) {
  ZoneController a = nominal(), b = nominal();
  const Vector& x = default_setup().reference.state;
  const ZoneOcpSolution sa = a.solve(x), sb = b.solve(x);
  EXPECT_EQ(sa.inputs, sb.inputs);
  EXPECT_EQ(sa.predicted_y, sb.predicted_y);
}

TEST(Nzempc, SteadyStateInZoneStaysInZone) {
  ZoneController ctl = nominal();
  const ExperimentSetup& s = default_setup();
  const Plant plant{s.model, s.scaling, 1.0};
  Vector x = s.reference.state;
  const Vector no_noise = Vector::Zero(x.size());
  for (int k = 0; k < 3; ++k) {
    const StepRecord r = receding_horizon_step(ctl, plant, x, no_noise);
    EXPECT_FALSE(r.fallback);
    // the soft penalty puts the economic optimum at upper + 1 / (2 c1)
    const double d = std::max(0.0, r.y - ctl.zone().upper);
    EXPECT_NEAR(r.y, ctl.zone().upper + 0.5 / ctl.zone().c1, 1e-6) << "step " << k;
    EXPECT_NEAR(r.stage_cost, -r.y + ctl.zone().c1 * d * d, 1e-15);
    EXPECT_EQ(r.clipped, 0);
  }
}

TEST(Rzempc, ModifiedZoneExists) { ASSERT_FALSE(default_modified_zone().empty()) << default_modified_zone().diagnostics; }

TEST(Rzempc, NoSlackAtSetCenter) {
  ZoneController ctl = robust();
  const Vector x = default_modified_zone().x_s;
  const ZoneOcpSolution sol = ctl.solve(x);
  EXPECT_EQ(sol.nlp.status, SolveStatus::kConverged) << sol.message;
  EXPECT_LE(sol.slacks.maxCoeff(), 1e-6);
  expect_consistent(ctl, x, sol);
}

TEST(Rzempc, ReachesTheSetWithinOneInterval) {
  ZoneController ctl = robust();
  const ExperimentSetup& s = default_setup();
  for (double y0 : {0.86, 0.70}) {
    const Vector x = steady_state_for_efficiency(s.model, y0, 1e-5, 5e-3).state;
    ASSERT_GT(ctl.tracked_set()->quadratic_form(s.scaling.scale(x)), 10 * ctl.tracked_set()->level());
    const ZoneOcpSolution sol = ctl.solve(x);
    EXPECT_LE(sol.nlp.kkt_residual, 1e-3);
    EXPECT_LE(sol.slacks.maxCoeff(), 1e-6) << "y0 " << y0;
    EXPECT_LE(sol.predicted_quadratic_form.maxCoeff(), ctl.tracked_set()->level() + 1e-6);
    expect_consistent(ctl, x, sol);
  }
}

TEST(Rzempc, WarmAndColdStartsAgree) {
  ZoneController ctl = robust();
  const Vector& x = default_setup().reference.state;
  ASSERT_FALSE(ctl.control(x).fallback);
  const ZoneOcpSolution warm = ctl.solve(x), cold = ctl.solve(x, true);
  EXPECT_NEAR(warm.inputs[0], cold.inputs[0], 1e-5);
  EXPECT_NEAR(warm.nlp.objective, cold.nlp.objective, 1e-6);
}

TEST(Controller, RejectsMismatchedDimensions) {
  const ExperimentSetup& s = default_setup();
  const Ellipsoid small(Vector::Zero(3), Matrix::Identity(3, 3), 1.0);
  EXPECT_THROW(ZoneController(s.model, s.scaling, ZoneSpec{}, ControllerParams{}, small), ConfigError);
  ZoneController ctl = nominal();
  EXPECT_THROW(ctl.solve(Vector::Zero(10)), ConfigError);
  Vector y;
  std::vector<Vector> states;
  EXPECT_THROW(ctl.predict(s.reference.state, Vector::Ones(3), y, states), ConfigError);
}

TEST(Plant, NoiseFreeSteadyStateIsStationary) {
  const ExperimentSetup& s = default_setup();
  const Plant plant{s.model, s.scaling, 1.0};
  Vector x = s.reference.state;
  const int clipped = advance_plant(plant, x, s.reference.solvent_flow, Vector::Zero(x.size()), 600.0);
  EXPECT_EQ(clipped, 0);
  EXPECT_NEAR(s.model.efficiency(x), s.reference.efficiency, 1e-8);
  EXPECT_THROW(advance_plant(plant, x, 1e-3, Vector::Zero(3), 600.0), ConfigError);
}

TEST(Plant, NoiseEntersScaledDerivative) {
  const ExperimentSetup& s = default_setup();
  const Plant plant{s.model, s.scaling, 1.0};
  Vector a = s.reference.state, b = a;
  Vector w = Vector::Zero(a.size());
  const int idx = StateLayout::gas_temperature(2);
  w[idx] = 1e-5;
  const Vector x0 = a;
  advance_plant(plant, a, s.reference.solvent_flow, Vector::Zero(a.size()), 10.0);
  advance_plant(plant, b, s.reference.solvent_flow, w, 10.0);
  EXPECT_GT(std::abs(b[idx] - a[idx]), 0.0);
  // oracle: the nominal right-hand side plus the constant w * scale
  const Vector shift = w.cwiseProduct(s.scaling.state_scale());
  const RhsFunction f = [&](const Eigen::Ref<const Vector>& x, double u, Eigen::Ref<Vector> dx) {
    s.model.rhs(x, u, dx);
    dx += shift;
  };
  const Vector ref = integrate(f, x0, {{s.reference.solvent_flow}, 10.0}, 0.0, 10.0, 1.0).states.back();
  EXPECT_LE((b - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
}
