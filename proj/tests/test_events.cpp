#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sie/events.hpp"
#include "sie/models.hpp"
#include "sie/poincare.hpp"
#include "sie/rng.hpp"
#include "support.hpp"

using namespace sie;
using sie::testing::vec;

TEST_CASE("linear-reset crossing is localized at t = 1", "[events]") {
  const double a = sie::testing::kLn2;
  const HybridSystemDef sys = model("linear-reset", {{"a", a}});
  for (double x2 : {0.0, 0.3, -1.7}) {
    const FlowSegment seg = integrate(sys, vec({0, x2}), ContinuousSignal::zero(1), 1.5);
    const auto ev = locate_crossing(seg, sys, ContinuousSignal::zero(1), 0.0);
    REQUIRE(ev);
    CHECK(std::abs(ev->t_hit - 1.0) <= 1e-10);
    CHECK(std::abs(ev->x_minus[0] - 1.0) <= 1e-10);
    CHECK(std::abs(ev->x_minus[1] - x2 * std::exp(-a)) <= 1e-9);
    CHECK(ev->lfh == Catch::Approx(-1.0));
  }
}

TEST_CASE("segment inside S+ has no crossing", "[events]") {
  const HybridSystemDef sys = model("linear-reset");
  const FlowSegment seg = integrate(sys, vec({0, 0.2}), ContinuousSignal::zero(1), 0.9);
  CHECK_FALSE(locate_crossing(seg, sys, ContinuousSignal::zero(1), 0.0));
  // a crossing before from_t is ignored
  const FlowSegment longer = integrate(sys, vec({0, 0.2}), ContinuousSignal::zero(1), 1.4);
  CHECK_FALSE(locate_crossing(longer, sys, ContinuousSignal::zero(1), 1.2));
}

TEST_CASE("rimless-wheel crossing matches the energy balance", "[events]") {
  const HybridSystemDef sys = model("rimless-wheel", sie::testing::rimless_params());
  const double wp = 1.0957;
  const SolverConfig cfg;
  const ImpactSearch s = flow_to_impact(sys, vec({sie::testing::kGamma - sie::testing::kAlpha, wp}),
                                        ContinuousSignal::zero(1), 0.0, 10.0, cfg);
  REQUIRE(s.event);
  CHECK(std::abs(s.event->x_minus[0] - (sie::testing::kGamma + sie::testing::kAlpha)) <= 1e-7);
  CHECK(std::abs(s.event->x_minus[1] - sie::testing::rimless_pre_impact(wp)) <= 1e-7);
  CHECK(s.segment.t1() == s.event->t_hit);
}

TEST_CASE("localized events satisfy the crossing invariants", "[events][property]") {
  const SolverConfig cfg;
  SplitMix64 g(31);
  const std::vector<std::pair<std::string, ParamMap>> models{
      {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}, {"bouncing-ball", {}}};
  for (const auto& [name, params] : models) {
    const HybridSystemDef sys = model(name, params);
    const State guess = default_guess(name, params);
    for (int trial = 0; trial < 10; ++trial) {
      State x = sys.eval_delta(guess, sys.zero_v());
      if (name == "bouncing-ball") x = vec({0.5 + g.uniform(), g.normal()});
      if (name == "vdp-adapter") x = vec({-1.0 - g.uniform(), 0.5 * g.uniform()});
      x[1] += 0.02 * g.normal();
      INFO(name << " start " << x.transpose());
      const auto u = ContinuousSignal::sinusoid(vec({0.05}), 3.0, g.uniform());
      const ImpactSearch s = flow_to_impact(sys, x, u, 0.0, 20.0, cfg);
      REQUIRE(s.event);
      const ImpactEvent& ev = *s.event;
      CHECK(std::abs(sys.eval_h(ev.x_minus)) <= cfg.events.event_tol);
      CHECK(ev.lfh < 0.0);
      const double grace = std::max(ev.width, 1e-9);
      const double start = s.segment.t0();
      const double span = ev.t_hit - grace - start;
      bool left_splus = false;
      for (int i = 1; i <= 100; ++i) {
        const double t = start + span * i / 101.0;
        const double h = sys.eval_h(s.segment.eval(t));
        // the adapter starts on its section in the lower half and is gated until it re-enters S+
        if (!sys.continuous_adapter) CHECK(h > 0.0);
        left_splus = left_splus || h > 0.0;
      }
      CHECK(left_splus);
    }
  }
}

TEST_CASE("tangential contact is reported as a graze", "[events][errors]") {
  HybridSystemDef sys;
  sys.name = "cubic";
  sys.n = 3;
  sys.p = 1;
  sys.q = 1;
  sys.f = [](const State& x, const Input&) { return vec({x[1], x[2], -6.0}); };
  sys.delta = [](const State& x, const Input&) { return State(x); };
  sys.h = [](const State& x) { return x[0]; };
  sys.grad_h = [](const State&) { return vec({1, 0, 0}); };
  // x1(t) = -(t - 1)^3 crosses zero with zero slope at t = 1
  const FlowSegment seg = integrate(sys, vec({1, -3, 6}), ContinuousSignal::zero(1), 2.0, IntegratorConfig::tight());
  try {
    (void)locate_crossing(seg, sys, ContinuousSignal::zero(1), 0.0);
    FAIL("expected a graze");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GrazeDetected);
  }
}

TEST_CASE("time to impact of the linear-reset model", "[events]") {
  const HybridSystemDef sys = model("linear-reset", {{"a", sie::testing::kLn2}});
  const SolverConfig cfg;
  const TimeToImpact t0 = time_to_impact(sys, vec({1, 0}), ContinuousSignal::zero(1), vec({0}), cfg);
  CHECK(t0.finite());
  CHECK(std::abs(t0.duration - 1.0) <= 1e-10);
  const TimeToImpact tu = time_to_impact(sys, vec({1, 0}), ContinuousSignal::constant(vec({0.7})), vec({0}), cfg);
  CHECK(std::abs(tu.duration - 1.0) <= 1e-10);
  const TimeToImpact ts = time_to_impact_from_splus(sys, vec({0.25, 0}), ContinuousSignal::zero(1), cfg);
  CHECK(std::abs(ts.duration - 0.75) <= 1e-10);
  CHECK((ts.x_next - vec({1, 0})).norm() <= 1e-10);
  CHECK_THROWS_AS(time_to_impact_from_splus(sys, vec({1, 0.3}), ContinuousSignal::zero(1), cfg), Error);
  CHECK_THROWS_AS(time_to_impact(sys, vec({0.5, 0}), ContinuousSignal::zero(1), vec({0}), cfg), Error);
}

TEST_CASE("flow pointing away from S never impacts", "[events]") {
  HybridSystemDef sys = model("linear-reset");
  sys.f = [](const State&, const Input&) { return vec({-1.0, 0.0}); };
  SolverConfig cfg;
  cfg.events.t_cap = 25.0;
  const TimeToImpact t = time_to_impact(sys, vec({1, 0}), ContinuousSignal::zero(1), vec({0}), cfg);
  CHECK_FALSE(t.finite());
  CHECK(t.segment.t1() == Catch::Approx(25.0));
}

TEST_CASE("reset onto S is rejected", "[events][errors]") {
  HybridSystemDef sys = model("linear-reset");
  sys.delta = [](const State& x, const Input&) { return State(x); };
  try {
    (void)time_to_impact(sys, vec({1, 0}), ContinuousSignal::zero(1), vec({0}), SolverConfig{});
    FAIL("expected ResetNotInSPlus");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResetNotInSPlus);
  }
}

TEST_CASE("adapter section is reached within one period", "[events]") {
  const auto solved = sie::testing::solve("vdp-adapter", {{"mu", 0.2}});
  const SolverConfig cfg = SolverConfig::tight();
  const double elapsed = 0.6 * solved.report.T_star;
  const State x = integrate(solved.sys, solved.report.x_star, ContinuousSignal::zero(1), elapsed, cfg.integ).x1();
  REQUIRE(solved.sys.eval_h(x) > 0.0);
  const TimeToImpact t = time_to_impact_from_splus(solved.sys, x, ContinuousSignal::zero(1), cfg);
  REQUIRE(t.finite());
  CHECK(t.duration < solved.report.T_star);
  CHECK(t.duration == Catch::Approx(solved.report.T_star - elapsed).epsilon(1e-7));
  CHECK(t.lfh < 0.0);
  CHECK((t.x_next - solved.report.x_star).norm() < 1e-7);
}

TEST_CASE("time to impact is continuous at the fixed point", "[events][property]") {
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}}) {
    const auto s = sie::testing::solve(name, params);
    const SurfaceChart chart(s.sys, s.report.x_star, s.report.chart_index);
    const SolverConfig cfg = SolverConfig::tight();
    const double base = time_to_impact(s.sys, s.report.x_star, ContinuousSignal::zero(1), s.sys.zero_v(), cfg).duration;
    CHECK(base == Catch::Approx(s.report.T_star).epsilon(1e-9));
    std::vector<double> slopes;
    for (double eps : {1e-3, 5e-4, 2.5e-4}) {
      const State xe = chart.embed(chart.project(s.report.x_star) + Eigen::VectorXd::Constant(chart.dim(), eps));
      const double te = time_to_impact(s.sys, xe, ContinuousSignal::zero(1), s.sys.zero_v(), cfg).duration;
      CHECK(std::abs(te - base) < 100.0 * eps);
      slopes.push_back((te - base) / eps);
    }
    INFO(name << " slopes " << slopes[0] << " " << slopes[1] << " " << slopes[2]);
    CHECK(std::isfinite(slopes[2]));
    CHECK(std::abs(slopes[2] - slopes[1]) <= 0.6 * std::abs(slopes[1] - slopes[0]) + 1e-6);
  }
}

TEST_CASE("impact times stay in a positive band near each orbit", "[events][property]") {
  SplitMix64 g(77);
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}}) {
    const auto s = sie::testing::solve(name, params);
    const auto& entry = catalog_entry(name);
    const SurfaceChart chart(s.sys, s.report.x_star, s.report.chart_index);
    const SolverConfig cfg;
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 200; ++i) {
      const State x = chart.embed(chart.project(s.report.x_star) + Eigen::VectorXd::Constant(chart.dim(), 0.02 * g.normal()));
      const auto u = ContinuousSignal::sinusoid(vec({0.05 * entry.u_scale}), 2.0, 6.28 * g.uniform());
      const Input v = vec({0.01 * entry.v_scale * (2.0 * g.uniform() - 1.0)});
      const TimeToImpact t = time_to_impact(s.sys, x, u, v, cfg);
      REQUIRE(t.finite());
      lo = std::min(lo, t.duration);
      hi = std::max(hi, t.duration);
    }
    const double t_lower = 0.8 * lo, t_upper = 1.2 * hi;
    INFO(name << " band [" << t_lower << ", " << t_upper << "]");
    CHECK(t_lower > 0.0);
    CHECK(t_lower < s.report.T_star);
    CHECK(s.report.T_star < t_upper);
    CHECK(hi / lo < 2.0);
  }
}
