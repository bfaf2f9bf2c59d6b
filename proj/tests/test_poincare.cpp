#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "sie/models.hpp"
#include "sie/poincare.hpp"
#include "sie/rng.hpp"
#include "support.hpp"

using namespace sie;
using sie::testing::vec;

namespace {

/// Two independently decaying coordinates and a tilted surface, so two chart choices exist.
HybridSystemDef tilted_system(double a, double b) {
  HybridSystemDef s;
  s.name = "tilted";
  s.n = 3;
  s.p = 1;
  s.q = 1;
  s.f = [a, b](const State& x, const Input& u) { return vec({1.0, -a * x[1] + u[0], -b * x[2]}); };
  s.delta = [](const State& x, const Input& v) { return vec({0.0, x[1] + v[0], x[2]}); };
  s.h = [](const State& x) { return 1.0 - x[0] - 0.5 * x[2]; };
  s.grad_h = [](const State&) { return vec({-1.0, 0.0, -0.5}); };
  return s;
}

std::vector<double> sorted_moduli(const Eigen::VectorXcd& ev) {
  std::vector<double> m;
  for (Eigen::Index i = 0; i < ev.size(); ++i) m.push_back(std::abs(ev[i]));
  std::sort(m.begin(), m.end());
  return m;
}

}  // namespace

TEST_CASE("linear-reset Poincare map", "[poincare]") {
  const double a = sie::testing::kLn2;
  const HybridSystemDef sys = model("linear-reset", {{"a", a}});
  const SolverConfig cfg = SolverConfig::tight();
  for (double x2 : {0.0, 0.4, -2.0}) {
    const State p = poincare_map(sys, vec({1, x2}), ContinuousSignal::zero(1), vec({0}), cfg);
    CHECK(std::abs(p[0] - 1.0) <= 1e-9);
    CHECK(std::abs(p[1] - 0.5 * x2) <= 1e-9);
  }
  const State pv = poincare_map(sys, vec({1, 0}), ContinuousSignal::zero(1), vec({0.2}), cfg);
  CHECK(std::abs(pv[1] - 0.1) <= 1e-9);
  const double ubar = 0.03;
  const State pu = poincare_map(sys, vec({1, 0.2}), ContinuousSignal::constant(vec({ubar})), vec({0}), cfg);
  CHECK(std::abs(pu[1] - (0.1 + ubar * (1.0 - std::exp(-a)) / a)) <= 1e-9);
  const PoincareStep st = poincare_step(sys, vec({1, 0.2}), ContinuousSignal::zero(1), vec({0}), cfg);
  CHECK(st.t_impact == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fixed points of the built-in models", "[poincare][fixed-point]") {
  SECTION("linear-reset from (1, 0.7)") {
    const HybridSystemDef sys = model("linear-reset", {{"a", sie::testing::kLn2}});
    const StabilityReport r = find_fixed_point(sys, vec({1, 0.7}));
    REQUIRE(r.converged);
    CHECK(std::abs(r.x_star[0] - 1.0) <= 1e-10);
    CHECK(std::abs(r.x_star[1]) <= 1e-8);
    CHECK(std::abs(r.T_star - 1.0) <= 1e-8);
  }
  SECTION("rimless wheel") {
    const auto params = sie::testing::rimless_params();
    const HybridSystemDef sys = model("rimless-wheel", params);
    const StabilityReport r = find_fixed_point(sys, vec({sie::testing::kGamma + sie::testing::kAlpha, 1.45}));
    REQUIRE(r.converged);
    CHECK(r.x_star[1] == Catch::Approx(sie::testing::rimless_omega_star()).epsilon(1e-9));
    CHECK(std::isfinite(r.T_star));
    CHECK(r.T_star > 0.0);
  }
  SECTION("rimless wheel below capture speed") {
    const HybridSystemDef sys = model("rimless-wheel", sie::testing::rimless_params());
    try {
      (void)find_fixed_point(sys, vec({sie::testing::kGamma + sie::testing::kAlpha, 1.2}));
      FAIL("expected the search to fail");
    } catch (const Error& e) {
      const bool expected = e.kind() == ErrorKind::NewtonDiverged || e.kind() == ErrorKind::InfiniteTimeToImpact;
      CHECK(expected);
    }
  }
}

TEST_CASE("fixed-point identity P(x*) = x*", "[poincare][fixed-point]") {
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}}) {
    const auto s = sie::testing::solve(name, params);
    const State p = poincare_map(s.sys, s.report.x_star, ContinuousSignal::zero(1), s.sys.zero_v(), SolverConfig::tight());
    INFO(name);
    CHECK((p - s.report.x_star).norm() <= 1e-8);
    CHECK(s.report.newton_residuals.back() <= 1e-10);
  }
}

TEST_CASE("Newton converges quadratically", "[poincare][fixed-point][property]") {
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}, {"vdp-adapter", {{"mu", 1.0}}}}) {
    const HybridSystemDef sys = model(name, params);
    const StabilityReport r = find_fixed_point(sys, default_guess(name, params));
    std::vector<double> res;
    for (double x : r.newton_residuals) {
      if (x > 1e-9) res.push_back(x);
    }
    INFO(name);
    REQUIRE(res.size() >= 2);
    const std::size_t first = res.size() >= 4 ? res.size() - 4 : 0;
    for (std::size_t k = first; k + 1 < res.size(); ++k) CHECK(res[k + 1] / (res[k] * res[k]) < 50.0);
  }
}

TEST_CASE("linearization of the oracle models", "[poincare][linearize]") {
  SECTION("linear-reset") {
    const auto s = sie::testing::solve("linear-reset", {{"a", sie::testing::kLn2}});
    REQUIRE(s.report.jacobian.rows() == 1);
    CHECK(std::abs(s.report.jacobian(0, 0) - 0.5) <= 1e-6);
    CHECK(std::abs(s.report.spectral_radius - 0.5) <= 1e-6);
    CHECK(s.report.verdict == Verdict::LES);
  }
  SECTION("rimless wheel") {
    const auto s = sie::testing::solve("rimless-wheel", sie::testing::rimless_params());
    CHECK(std::abs(s.report.spectral_radius - std::pow(std::cos(2 * sie::testing::kAlpha), 2)) <= 1e-5);
    CHECK(s.report.verdict == Verdict::LES);
  }
  SECTION("Van der Pol adapter") {
    const auto s = sie::testing::solve("vdp-adapter", {{"mu", 0.2}});
    REQUIRE(s.report.eigenvalues.size() == 1);
    CHECK(s.report.spectral_radius < 1.0);
    CHECK(s.report.verdict == Verdict::LES);
    CHECK(s.report.richardson_consistent());
    const double diff = std::abs(s.report.jacobian(0, 0) - s.report.jacobian_half(0, 0));
    CHECK(diff <= s.report.richardson_bound);
    const auto o = oracle("vdp-adapter", {{"mu", 0.2}});
    REQUIRE(o);
    CHECK(s.report.spectral_radius == Catch::Approx(*o->eigenvalue).epsilon(1e-6));
  }
  SECTION("harmonic oscillator is marginal") {
    const auto s = sie::testing::solve("vdp-adapter", {{"mu", 0.0}});
    CHECK(s.report.verdict == Verdict::LASMarginal);
    CHECK(s.report.spectral_radius == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(s.report.T_star == Catch::Approx(2 * std::numbers::pi).epsilon(1e-9));
  }
}

TEST_CASE("finite-difference Jacobians pass the step-halving check", "[poincare][linearize][property]") {
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}, {"vdp-adapter", {{"mu", 2.0}}}}) {
    const auto s = sie::testing::solve(name, params);
    INFO(name << " diff " << s.report.richardson_diff << " bound " << s.report.richardson_bound);
    CHECK(s.report.richardson_consistent());
    CHECK(s.report.fd_step > 0.0);
  }
}

TEST_CASE("verdict classification", "[poincare]") {
  CHECK(classify(0.5, 1e-6) == Verdict::LES);
  CHECK(classify(1.0 - 2e-6, 1e-6) == Verdict::LES);
  CHECK(classify(1.0 - 1e-6, 1e-6) == Verdict::LASMarginal);
  CHECK(classify(1.0 + 5e-7, 1e-6) == Verdict::LASMarginal);
  CHECK(classify(1.1, 1e-6) == Verdict::Unstable);
  CHECK(to_string(Verdict::LES) == "LES");
  CHECK(to_string(Verdict::LASMarginal) == "LAS-marginal");
  CHECK(to_string(Verdict::Unstable) == "unstable");
}

TEST_CASE("chart round trips on S", "[poincare][chart][property]") {
  SplitMix64 g(9);
  for (const auto& [name, params] : std::vector<std::pair<std::string, ParamMap>>{
           {"linear-reset", {}}, {"rimless-wheel", {}}, {"vdp-adapter", {{"mu", 0.2}}}}) {
    const auto s = sie::testing::solve(name, params);
    const SurfaceChart chart(s.sys, s.report.x_star);
    CHECK(chart.eliminated() == s.report.chart_index);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd z = chart.project(s.report.x_star) + Eigen::VectorXd::Constant(chart.dim(), 0.1 * g.normal());
      const State x = chart.embed(z);
      CHECK(std::abs(s.sys.eval_h(x)) <= 1e-12);
      CHECK(chart.project(x) == z);
      CHECK((chart.embed(chart.project(x)) - x).norm() <= 1e-10);
    }
  }
}

TEST_CASE("chart on a vanishing gradient component is singular", "[poincare][chart]") {
  const HybridSystemDef sys = model("linear-reset");
  const SurfaceChart chart(sys, vec({1, 0}), 1);
  try {
    (void)chart.embed(vec({0.5}));
    FAIL("expected ChartSingular");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ChartSingular);
  }
}

TEST_CASE("eigenvalues do not depend on the eliminated coordinate", "[poincare][chart][property]") {
  const double a = sie::testing::kLn2, b = 1.2;
  const HybridSystemDef sys = tilted_system(a, b);
  FixedPointConfig c0, c2;
  c0.chart_index = 0;
  c2.chart_index = 2;
  const StabilityReport r0 = linearize(sys, find_fixed_point(sys, vec({0.9, 0.2, 0.2}), c0), c0);
  const StabilityReport r2 = linearize(sys, find_fixed_point(sys, vec({0.9, 0.2, 0.2}), c2), c2);
  CHECK(r0.chart_index == 0);
  CHECK(r2.chart_index == 2);
  const auto m0 = sorted_moduli(r0.eigenvalues), m2 = sorted_moduli(r2.eigenvalues);
  REQUIRE(m0.size() == 2);
  REQUIRE(m2.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(m0[i] - m2[i]) <= 1e-8);
  CHECK(m0[0] == Catch::Approx(std::exp(-b)).epsilon(1e-6));
  CHECK(m0[1] == Catch::Approx(std::exp(-a)).epsilon(1e-6));
}

TEST_CASE("in-repo eigenvalues agree with a reference solver", "[poincare][eigen]") {
  SplitMix64 g(4242);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 8;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) m(i, j) = g.normal();
    }
    const Eigen::VectorXcd ours = eigenvalues(m);
    const Eigen::VectorXcd ref = Eigen::EigenSolver<Eigen::MatrixXd>(m, false).eigenvalues();
    REQUIRE(ours.size() == n);
    // every reference eigenvalue is matched by a distinct computed one
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      double best = 1e300;
      int arg = -1;
      for (int j = 0; j < n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double d = std::abs(ours[j] - ref[i]);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      REQUIRE(arg >= 0);
      used[static_cast<std::size_t>(arg)] = true;
      CHECK(best <= 1e-8 * std::max(1.0, m.norm()));
    }
  }
  Eigen::MatrixXd rot(2, 2);
  rot << 0, -1, 1, 0;
  const Eigen::VectorXcd ev = eigenvalues(rot);
  CHECK(std::abs(std::abs(ev[0]) - 1.0) < 1e-14);
  CHECK(std::abs(ev[0].imag()) == Catch::Approx(1.0));
}
