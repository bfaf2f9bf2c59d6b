#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sie/models.hpp"
#include "sie/poincare.hpp"
#include "support.hpp"

using namespace sie;
using sie::testing::vec;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidConfig;
}

}  // namespace

TEST_CASE("catalog lists the built-in models", "[models]") {
  std::vector<std::string> names;
  for (const auto& e : catalog()) names.push_back(e.name);
  CHECK(names == std::vector<std::string>{"linear-reset", "rimless-wheel", "vdp-adapter", "bouncing-ball"});
  CHECK(catalog_entry("bouncing-ball").negative_control);
  CHECK_FALSE(catalog_entry("rimless-wheel").negative_control);
  CHECK(kind_of([] { (void)catalog_entry("compass-gait"); }) == ErrorKind::UnknownModel);
  CHECK(kind_of([] { (void)model("compass-gait"); }) == ErrorKind::UnknownModel);
}

TEST_CASE("parameters are validated against the schema", "[models]") {
  const ParamMap p = resolve_params("rimless-wheel");
  CHECK(p.at("alpha") == Catch::Approx(std::numbers::pi / 8));
  CHECK(p.at("gamma") == 0.08);
  CHECK(p.at("g_over_l") == 9.81);
  CHECK(resolve_params("linear-reset").at("a") == Catch::Approx(std::numbers::ln2));
  CHECK(kind_of([] { (void)resolve_params("linear-reset", {{"b", 1.0}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { (void)resolve_params("linear-reset", {{"a", 0.0}}); }) == ErrorKind::ParamOutOfRange);
  CHECK(kind_of([] { (void)resolve_params("bouncing-ball", {{"restitution", 1.0}}); }) == ErrorKind::ParamOutOfRange);
  CHECK(kind_of([] { (void)resolve_params("rimless-wheel", {{"alpha", 1.0}}); }) == ErrorKind::ParamOutOfRange);
  CHECK(kind_of([] { (void)resolve_params("vdp-adapter", {{"mu", -0.1}}); }) == ErrorKind::ParamOutOfRange);
  CHECK_NOTHROW(resolve_params("vdp-adapter", {{"mu", 0.0}}));
}

TEST_CASE("model dimensions", "[models]") {
  for (const auto& e : catalog()) {
    const HybridSystemDef s = model(e.name);
    CHECK(s.name == e.name);
    CHECK(s.n == 2);
    CHECK(s.p == 1);
    CHECK(s.q == 1);
    CHECK(s.continuous_adapter == (e.name == "vdp-adapter"));
  }
}

TEST_CASE("linear-reset oracle", "[models][oracle]") {
  const auto o = oracle("linear-reset", {{"a", std::numbers::ln2}});
  REQUIRE(o);
  CHECK(*o->x_star == vec({1, 0}));
  CHECK(*o->T_star == 1.0);
  CHECK(*o->eigenvalue == Catch::Approx(0.5));
  CHECK(*o->forced_gain == Catch::Approx(1.0 / std::numbers::ln2));
  const auto s = sie::testing::solve("linear-reset", {{"a", 1.5}});
  CHECK(s.report.spectral_radius == Catch::Approx(std::exp(-1.5)).epsilon(1e-6));
}

TEST_CASE("rimless-wheel oracle matches the energy balance", "[models][oracle]") {
  for (const auto& [alpha, gamma] : std::vector<std::pair<double, double>>{
           {std::numbers::pi / 8, 0.08}, {0.3, 0.05}, {0.25, 0.1}}) {
    const ParamMap params{{"alpha", alpha}, {"gamma", gamma}, {"g_over_l", 9.81}};
    const auto o = oracle("rimless-wheel", params);
    REQUIRE(o);
    const double ws = sie::testing::rimless_omega_star(alpha, gamma);
    // energy balance: (1 - cos^2 2a) w*^2 = 2 g/l (cos(g - a) - cos(g + a))
    const double lhs = (1 - std::pow(std::cos(2 * alpha), 2)) * ws * ws;
    CHECK(lhs == Catch::Approx(2 * 9.81 * (std::cos(gamma - alpha) - std::cos(gamma + alpha))).epsilon(1e-12));
    CHECK((*o->x_star)[0] == Catch::Approx(gamma + alpha));
    CHECK((*o->x_star)[1] == Catch::Approx(ws).epsilon(1e-12));
    CHECK(*o->eigenvalue == Catch::Approx(std::pow(std::cos(2 * alpha), 2)).epsilon(1e-12));
    const auto s = sie::testing::solve("rimless-wheel", params);
    INFO("alpha " << alpha << " gamma " << gamma);
    CHECK(s.report.x_star[1] == Catch::Approx(ws).epsilon(1e-9));
    CHECK(s.report.T_star == Catch::Approx(*o->T_star).epsilon(1e-8));
    CHECK(s.report.spectral_radius == Catch::Approx(*o->eigenvalue).margin(1e-5));
  }
  CHECK(std::abs(sie::testing::rimless_omega_star() - 1.5494) < 1e-3);
}

TEST_CASE("rimless wheel without a walking cycle", "[models][oracle]") {
  // post-impact speed at the energy-balance point is too small to pass the vertical
  const ParamMap params{{"alpha", 0.5}, {"gamma", 0.15}, {"g_over_l", 9.81}};
  const auto o = oracle("rimless-wheel", params);
  REQUIRE(o);
  CHECK_FALSE(o->x_star);
  CHECK_FALSE(check_registration("rimless-wheel", params).passed());
  CHECK_THROWS_AS(find_fixed_point(model("rimless-wheel", params), default_guess("rimless-wheel", params)), Error);
}

TEST_CASE("Van der Pol adapter oracle", "[models][oracle]") {
  const auto o0 = oracle("vdp-adapter", {{"mu", 0.0}});
  REQUIRE(o0);
  CHECK(*o0->T_star == Catch::Approx(2 * std::numbers::pi));
  CHECK(*o0->eigenvalue == 1.0);
  CHECK(*o0->x_star == vec({2, 0}));

  const auto o = oracle("vdp-adapter", {{"mu", 0.2}});
  REQUIRE(o);
  const double asym = 2 * std::numbers::pi * (1 + 0.04 / 16);
  CHECK(*o->asymptotic_period == Catch::Approx(asym));
  CHECK(std::abs(*o->T_star / asym - 1.0) <= 5e-3);
  const auto s = sie::testing::solve("vdp-adapter", {{"mu", 0.2}});
  CHECK(s.report.T_star == Catch::Approx(*o->T_star).epsilon(1e-7));
  CHECK((s.report.x_star - *o->x_star).norm() <= 1e-6);
  CHECK(s.report.spectral_radius == Catch::Approx(*o->eigenvalue).epsilon(1e-6));
}

TEST_CASE("bouncing ball has no oracle", "[models][oracle]") {
  CHECK_FALSE(oracle("bouncing-ball"));
  CHECK(default_guess("bouncing-ball") == vec({0, -1}));
}

TEST_CASE("registration checks", "[models][registration]") {
  for (const std::string name : {"linear-reset", "rimless-wheel", "vdp-adapter"}) {
    const RegistrationCheck r = check_registration(name);
    INFO(name << ": " << r.note);
    CHECK(r.passed());
    CHECK(r.lfh < 0.0);
  }
  const RegistrationCheck rl = check_registration("linear-reset");
  CHECK(rl.h_after_reset == Catch::Approx(1.0));
  const RegistrationCheck ball = check_registration("bouncing-ball");
  CHECK_FALSE(ball.passed());
}

TEST_CASE("default guesses lie on S", "[models]") {
  for (const auto& e : catalog()) {
    const HybridSystemDef s = model(e.name);
    CHECK(std::abs(s.eval_h(default_guess(e.name))) <= 1e-12);
  }
}
