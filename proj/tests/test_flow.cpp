#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sie/flow.hpp"
#include "sie/models.hpp"
#include "sie/rng.hpp"
#include "support.hpp"

using namespace sie;
using sie::testing::vec;

namespace {

HybridSystemDef scalar_system(std::function<State(const State&, const Input&)> f, int n = 1) {
  HybridSystemDef s;
  s.name = "scalar";
  s.n = n;
  s.p = 1;
  s.q = 1;
  s.f = std::move(f);
  s.delta = [](const State& x, const Input&) { return State(x); };
  s.h = [](const State& x) { return 1.0 + x.squaredNorm(); };
  return s;
}

}  // namespace

TEST_CASE("linear-reset flow matches the closed form", "[flow]") {
  const double a = sie::testing::kLn2;
  const HybridSystemDef sys = model("linear-reset", {{"a", a}});
  const FlowSegment seg = integrate(sys, vec({0, 1}), ContinuousSignal::zero(1), 1.0);
  CHECK(std::abs(seg.x1()[0] - 1.0) <= 1e-9);
  CHECK(std::abs(seg.x1()[1] - 0.5) <= 1e-9);
  CHECK(seg.eval(0.0) == vec({0, 1}));
  CHECK(seg.eval(1.0) == seg.x1());
  for (int i = 0; i <= 200; ++i) {
    const double t = i / 200.0;
    const State x = seg.eval(t);
    CHECK(std::abs(x[0] - t) <= 1e-9);
    CHECK(std::abs(x[1] - std::exp(-a * t)) <= 1e-8);
    const State dx = seg.derivative(t);
    CHECK(std::abs(dx[1] + a * std::exp(-a * t)) <= 1e-6);
  }
}

TEST_CASE("constant input drives the timer-free coordinate", "[flow]") {
  const double a = sie::testing::kLn2, ubar = 0.3;
  const HybridSystemDef sys = model("linear-reset", {{"a", a}});
  const FlowSegment seg = integrate(sys, vec({0, 0}), ContinuousSignal::constant(vec({ubar})), 2.0);
  CHECK(seg.x1()[1] == Catch::Approx(ubar / a * (1.0 - std::exp(-2.0 * a))).epsilon(1e-9));
}

TEST_CASE("rimless-wheel stance conserves energy", "[flow]") {
  const HybridSystemDef sys = model("rimless-wheel", sie::testing::rimless_params());
  const State x0 = vec({sie::testing::kGamma - sie::testing::kAlpha, 1.0957});
  const FlowSegment seg = integrate(sys, x0, ContinuousSignal::zero(1), 1.0);
  const double e0 = sie::testing::rimless_energy(x0);
  for (int i = 0; i <= 400; ++i) {
    CHECK(std::abs(sie::testing::rimless_energy(seg.eval(i / 400.0)) - e0) <= 1e-8);
  }
}

TEST_CASE("input is read on the global clock", "[flow]") {
  const HybridSystemDef sys = scalar_system([](const State&, const Input& u) { return State(u); });
  const auto u = ContinuousSignal::sinusoid(vec({1.0}), 2.0);
  const FlowSegment seg = integrate(sys, vec({0.0}), u, 1.0, 2.5);
  const double expected = (std::cos(2.0) - std::cos(5.0)) / 2.0;
  CHECK(seg.x1()[0] == Catch::Approx(expected).epsilon(1e-9));
  CHECK(seg.t0() == 1.0);
  CHECK(seg.t1() == 2.5);
}

TEST_CASE("zero vector field is the identity flow", "[flow]") {
  const HybridSystemDef sys = scalar_system([](const State& x, const Input&) { return State(State::Zero(x.size())); }, 3);
  const State x0 = vec({0.1, -2.0, 7.5});
  const FlowSegment seg = integrate(sys, x0, ContinuousSignal::zero(1), 10.0);
  CHECK(seg.x1() == x0);
  for (double t : {0.0, 0.3, 4.4, 10.0}) CHECK(seg.eval(t) == x0);
}

TEST_CASE("dense output tracks the harmonic oscillator", "[flow]") {
  const HybridSystemDef sys = model("vdp-adapter", {{"mu", 0.0}});
  IntegratorConfig cfg;
  const FlowSegment seg = integrate(sys, vec({2, 0}), ContinuousSignal::zero(1), 2.0 * std::numbers::pi, cfg);
  double worst = 0.0;
  for (int i = 0; i <= 5000; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 5000.0;
    worst = std::max(worst, (seg.eval(t) - vec({2 * std::cos(t), -2 * std::sin(t)})).norm());
  }
  CHECK(worst < 1000.0 * cfg.rtol * 2.0);
  // interpolant error is of the same class as a half-tolerance re-integration
  IntegratorConfig half = cfg;
  half.rtol *= 0.5;
  half.atol *= 0.5;
  const FlowSegment ref = integrate(sys, vec({2, 0}), ContinuousSignal::zero(1), 2.0 * std::numbers::pi, half);
  double gap = 0.0;
  for (int i = 0; i <= 997; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 997.0;
    gap = std::max(gap, (seg.eval(t) - ref.eval(t)).norm());
  }
  CHECK(gap < 1000.0 * cfg.rtol * 2.0);
}

TEST_CASE("semigroup property on built-in models", "[flow][property]") {
  const IntegratorConfig cfg;
  SplitMix64 g(2718);
  const auto u = ContinuousSignal::sinusoid(vec({0.3}), 2.5, 0.4);
  const std::vector<std::pair<std::string, ParamMap>> models{
      {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}, {"bouncing-ball", {}}};
  int cases = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& [name, params] = models[static_cast<std::size_t>(i) % models.size()];
    const HybridSystemDef sys = model(name, params);
    const double t = 0.05 + 0.95 * g.uniform(), s = 0.05 + 0.95 * g.uniform();
    const State x = vec({2.0 * g.uniform() - 1.0, 2.0 * g.uniform() - 1.0});
    const State direct = integrate(sys, x, u, t + s, cfg).x1();
    const State mid = integrate(sys, x, u, t, cfg).x1();
    const State composed = integrate(sys, mid, u.shifted(t), s, cfg).x1();
    CHECK((direct - composed).norm() <= 50.0 * (cfg.rtol * x.norm() + cfg.atol));
    ++cases;
  }
  CHECK(cases == 100);
}

TEST_CASE("tightening tolerances reduces the endpoint error", "[flow][property]") {
  const HybridSystemDef sys = model("vdp-adapter", {{"mu", 1.0}});
  const State x0 = vec({1.5, 0.5});
  auto endpoint = [&](double rtol) {
    IntegratorConfig c;
    c.rtol = rtol;
    c.atol = rtol * 1e-2;
    return integrate(sys, x0, ContinuousSignal::zero(1), 5.0, c).x1();
  };
  const State ref = endpoint(1e-12);
  const double loose = (endpoint(1e-6) - ref).norm();
  const double tight = (endpoint(1e-8) - ref).norm();
  CHECK(tight * 10.0 <= loose);
}

TEST_CASE("flow sensitivity of the linear-reset model", "[flow][sensitivity]") {
  const HybridSystemDef sys = model("linear-reset", {{"a", sie::testing::kLn2}});
  const Sensitivity s = flow_sensitivity(sys, vec({0, 1}), ContinuousSignal::zero(1), 1.0,
                                         IntegratorConfig::tight(), vec({0, 1}));
  CHECK(std::abs(s.derivative_half[0]) <= 1e-6);
  CHECK(std::abs(s.derivative_half[1] - 0.5) <= 1e-6);
  const Sensitivity zero = flow_sensitivity(sys, vec({0.4, 1}), ContinuousSignal::zero(1), 0.0, {}, vec({0.6, 0.8}));
  CHECK(zero.derivative == vec({0.6, 0.8}));
  CHECK_THROWS_AS(flow_sensitivity(sys, vec({0, 1}), ContinuousSignal::zero(1), 1.0, {}, vec({1, 1})), Error);
}

TEST_CASE("flow sensitivity agrees with the variational equation", "[flow][sensitivity]") {
  const double mu = 0.2;
  const HybridSystemDef sys = model("vdp-adapter", {{"mu", mu}});
  // state and tangent vector integrated together
  const HybridSystemDef var = scalar_system(
      [mu](const State& y, const Input&) {
        State d(4);
        d[0] = y[1];
        d[1] = mu * (1 - y[0] * y[0]) * y[1] - y[0];
        d[2] = y[3];
        d[3] = (-2 * mu * y[0] * y[1] - 1) * y[2] + mu * (1 - y[0] * y[0]) * y[3];
        return d;
      },
      4);
  SplitMix64 g(5);
  for (int trial = 0; trial < 5; ++trial) {
    State dir = vec({g.normal(), g.normal()});
    dir.normalize();
    const State x0 = vec({1.0 + g.uniform(), g.uniform() - 0.5});
    const double T = 1.0 + 2.0 * g.uniform();
    const Sensitivity s = flow_sensitivity(sys, x0, ContinuousSignal::zero(1), T, IntegratorConfig::tight(), dir);
    State y0(4);
    y0 << x0, dir;
    const State ref = integrate(var, y0, ContinuousSignal::zero(1), T, IntegratorConfig::tight()).x1().tail(2);
    CHECK((s.derivative_half - ref).norm() <= std::max(10.0 * s.error_estimate, 1e-7));
    CHECK(s.error_estimate < 1e-5);
  }
}

TEST_CASE("diverging flows stop with a blowup error", "[flow][errors]") {
  const HybridSystemDef sys = scalar_system([](const State& x, const Input&) { return State(x.array().square()); });
  const FlowResult r = integrate_partial(sys, vec({1.0}), ContinuousSignal::zero(1), 0.0, 2.0);
  REQUIRE(r.error);
  CHECK(r.error->kind() == ErrorKind::Blowup);
  CHECK(r.error->time() < 1.0);
  CHECK_FALSE(r.segment.empty());
  CHECK(r.segment.t1() < 1.0);
  CHECK_THROWS_AS(integrate(sys, vec({1.0}), ContinuousSignal::zero(1), 2.0), Error);
}

TEST_CASE("step budget is enforced", "[flow][errors]") {
  const HybridSystemDef sys = model("vdp-adapter", {{"mu", 0.2}});
  IntegratorConfig cfg;
  cfg.max_steps = 5;
  try {
    (void)integrate(sys, vec({2, 0}), ContinuousSignal::zero(1), 50.0, cfg);
    FAIL("expected a step budget failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepLimitExceeded);
  }
}

TEST_CASE("integrator config validation", "[flow][config]") {
  IntegratorConfig cfg;
  cfg.rtol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(IntegratorConfig::tight().rtol == 1e-12);
}
