#include "smpc/controller.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "smpc/dcdc.hpp"
#include "smpc/sim.hpp"
#include "test_support.hpp"

namespace smpc {
namespace {

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

TEST(Init, PublishedInitialStateIsFeasible) {
  const auto& tp = test::dcdc_tp();
  const Vector x0 = dcdc::initial_state();
  ControllerState st;
  ASSERT_NO_THROW(st = init(tp, Variant::ic, x0));
  EXPECT_EQ(st.z1_prev, x0);
}

TEST(Init, OriginIsFeasible) {
  for (Variant v : {Variant::ic, Variant::lxi, Variant::bak, Variant::lqr}) {
    const ControllerState st = init(test::dcdc_tp(v), v, Vector::Zero(2));
    EXPECT_EQ(st.z1_prev, Vector::Zero(2));
    EXPECT_EQ(st.step_index, 0);
    EXPECT_EQ(st.variant, v);
  }
}

TEST(Init, FarStateIsRejected) {
  const auto& tp = test::dcdc_tp();
  try {
    init(tp, Variant::ic, vec2(10.0, 0.0));
    FAIL() << "expected DesignInfeasible";
  } catch (const DesignInfeasible& e) {
    EXPECT_NE(std::string(e.what()).find("x0 outside initially feasible region"), std::string::npos);
  }
  // LQR has no surrogate problem to be infeasible.
  EXPECT_NO_THROW(init(tp, Variant::lqr, vec2(10.0, 0.0)));
  EXPECT_THROW(init(tp, Variant::ic, Vector::Zero(3)), InputError);
}

TEST(Init, ExplicitInitialPrediction) {
  const auto& tp = test::dcdc_tp();
  const Vector x0 = dcdc::initial_state();
  const Vector z = *closest_initial_state(tp, x0);
  const ControllerState st = init(tp, Variant::ic, x0, z);
  EXPECT_EQ(st.z1_prev, z);
  const StepResult r = step(tp, st, x0);
  EXPECT_GT(r.diagnostics.xi, 0.0);
  EXPECT_THROW(init(tp, Variant::ic, vec2(10.0, 0.0), vec2(10.0, 0.0)), DesignInfeasible);
}

TEST(Step, CollapsedInterpolationHasZeroError) {
  const auto& tp = test::dcdc_tp();
  const Vector x = vec2(0.6, 0.9);
  for (Variant v : {Variant::ic, Variant::lxi, Variant::bak}) {
    ControllerState st = init(test::dcdc_tp(v), v, x);
    const StepResult r = step(test::dcdc_tp(v), st, x);
    ASSERT_TRUE(r.state.last_solution.has_value());
    EXPECT_LE((r.state.last_solution->z[0] - x).norm(), 1e-12);
    EXPECT_LE((r.u - r.state.last_solution->v[0]).norm(), 1e-12);
    EXPECT_EQ(r.state.step_index, 1);
    const Vector z1 = tp.system().A * x + tp.system().B * r.state.last_solution->v[0];
    EXPECT_LE((r.state.z1_prev - z1).norm(), 1e-12);
  }
}

TEST(Step, InteriorStateGivesLqrInput) {
  const auto& tp = test::dcdc_tp();
  const Vector x = vec2(-0.3, 0.1);
  const ControllerState st = init(tp, Variant::ic, vec2(0.1, 0.05));
  const StepResult r = step(tp, st, x);
  EXPECT_LE((r.u - tp.design().K * x).norm(), 1e-5);
  EXPECT_LE(r.diagnostics.xi, kXiZeroThreshold);
}

TEST(Step, LqrVariant) {
  const auto& tp = test::dcdc_tp();
  const Vector x = vec2(3.0, -1.0);
  const StepResult r = step(tp, init(tp, Variant::lqr, x), x);
  EXPECT_EQ(r.u, tp.design().K * x);
  EXPECT_FALSE(r.diagnostics.has_xi);
}

TEST(Step, BackupBranchForViolatingState) {
  const auto& tp = test::dcdc_tp();
  ControllerState st = init(tp, Variant::bak, Vector::Zero(2));
  st = step(tp, st, Vector::Zero(2)).state;
  const Vector x = vec2(3.0, 0.0);
  const StepResult r = step(tp, st, x);
  EXPECT_TRUE(r.diagnostics.backup_branch);
  ASSERT_TRUE(r.state.last_solution.has_value());
  EXPECT_EQ(r.state.last_solution->z[0], st.z1_prev);
  EXPECT_EQ(r.diagnostics.xi, 1.0);
  // u = v0 + K (x - z0).
  EXPECT_LE((r.u - (r.state.last_solution->v[0] + tp.design().K * (x - st.z1_prev))).norm(), 1e-12);
}

TEST(Step, RejectsInvalidState) {
  const auto& tp = test::dcdc_tp();
  const ControllerState st = init(tp, Variant::ic, Vector::Zero(2));
  EXPECT_THROW(step(tp, st, vec2(NAN, 0.0)), RuntimeFailure);
  EXPECT_THROW(step(tp, st, Vector::Zero(3)), RuntimeFailure);
}

/// Whenever bak's first branch is taken and ic selects ξ = 0, both solve the
/// same problem and must agree.
TEST(Step, BakAndIcCoincideWhenXiIsZero) {
  const auto& tp = test::dcdc_tp();
  const DisturbanceSampler sampler(tp.design().sigma_w);
  const Vector z0 = *closest_initial_state(tp, dcdc::initial_state());
  int compared = 0;
  for (int r = 0; r < 40; ++r) {
    Vector x = z0;
    ControllerState ic = init(tp, Variant::ic, x);
    for (int k = 0; k < 30; ++k) {
      ControllerState bak = ic;
      bak.variant = Variant::bak;
      const StepResult a = step(tp, ic, x);
      const StepResult b = step(tp, bak, x);
      if (!b.diagnostics.backup_branch && a.diagnostics.xi <= kXiZeroThreshold) {
        EXPECT_LE((a.u - b.u).norm(), 1e-5) << "run " << r << " step " << k;
        ++compared;
      }
      ic = a.state;
      x = tp.system().A * x + tp.system().B * a.u +
          sampler.sample(31, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k));
    }
  }
  EXPECT_GT(compared, 500);
}

TEST(XiZeroFraction, Examples) {
  EXPECT_THROW(xi_zero_fraction({}), InputError);
  std::vector<StepDiagnostics> lqr(3);
  EXPECT_THROW(xi_zero_fraction(lqr), InputError);

  // ic from the origin with tiny noise stays unconstrained.
  const auto& tp = test::dcdc_tp();
  const DisturbanceSampler tiny(1e-6 * Matrix::Identity(2, 2));
  std::vector<StepDiagnostics> log;
  Vector x = Vector::Zero(2);
  ControllerState st = init(tp, Variant::ic, x);
  for (int k = 0; k < 100; ++k) {
    const StepResult r = step(tp, st, x);
    log.push_back(r.diagnostics);
    st = r.state;
    x = tp.system().A * x + tp.system().B * r.u + tiny.sample(1, 0, static_cast<std::uint64_t>(k));
  }
  EXPECT_EQ(xi_zero_fraction(log), 1.0);

  std::vector<StepDiagnostics> mixed(4);
  for (auto& d : mixed) d.has_xi = true;
  mixed[1].xi = 0.5;
  EXPECT_EQ(xi_zero_fraction(mixed), 0.75);
}

TEST(XiZeroFraction, PenaltyIncreasesZeroFraction) {
  SimConfig cfg;
  cfg.runs = 200;
  cfg.steps = 30;
  cfg.master_seed = 3;
  cfg.x0 = dcdc::initial_state();
  cfg.z1_init = *closest_initial_state(test::dcdc_tp(), cfg.x0);
  const McSummary ic = monte_carlo(test::dcdc_tp(Variant::ic), Variant::ic, cfg, 1);
  const McSummary lxi = monte_carlo(test::dcdc_tp(Variant::lxi), Variant::lxi, cfg, 1);
  EXPECT_GE(lxi.xi_zero_fraction, ic.xi_zero_fraction);
}

}  // namespace
}  // namespace smpc
