#pragma once

#include <cmath>
#include <numbers>

#include "sie/models.hpp"
#include "sie/orbit.hpp"

namespace sie::testing {

inline const double kLn2 = std::numbers::ln2;
inline const double kAlpha = std::numbers::pi / 8.0;
inline const double kGamma = 0.08;
inline const double kGl = 9.81;

inline ParamMap rimless_params() { return {{"alpha", kAlpha}, {"gamma", kGamma}, {"g_over_l", kGl}}; }

/// Fixed point of the rimless wheel from the energy balance over one stance phase.
inline double rimless_omega_star(double alpha = kAlpha, double gamma = kGamma, double gl = kGl) {
  return std::sqrt(4.0 * gl * std::sin(alpha) * std::sin(gamma)) / std::sin(2.0 * alpha);
}

/// Pre-impact angular velocity from the post-impact one (energy conservation over the stance).
inline double rimless_pre_impact(double omega_plus, double alpha = kAlpha, double gamma = kGamma,
                                 double gl = kGl) {
  return std::sqrt(omega_plus * omega_plus + 2.0 * gl * (std::cos(gamma - alpha) - std::cos(gamma + alpha)));
}

inline double rimless_energy(const State& x, double gl = kGl) { return 0.5 * x[1] * x[1] + gl * std::cos(x[0]); }

struct Solved {
  HybridSystemDef sys;
  StabilityReport report;
};

inline Solved solve(const std::string& name, const ParamMap& params = {}) {
  HybridSystemDef sys = model(name, params);
  FixedPointConfig cfg;
  StabilityReport rep = linearize(sys, find_fixed_point(sys, default_guess(name, params), cfg), cfg);
  return {std::move(sys), std::move(rep)};
}

inline State vec(std::initializer_list<double> v) {
  State x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

}  // namespace sie::testing
