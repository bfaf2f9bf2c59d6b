#include "sie/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sie {

namespace {

const ParamSpec* find_spec(const ModelCatalogEntry& e, const std::string& key) {
  for (const auto& p : e.params) {
    if (p.name == key) return &p;
  }
  return nullptr;
}

State vec2(double a, double b) {
  State x(2);
  x << a, b;
  return x;
}

// ---------------------------------------------------------------------------
// Reference integration for the Van der Pol adapter: fixed-step RK4 on the state augmented
// with the divergence integral, so the return multiplier follows from Liouville's formula.

struct VdpRef {
  double mu;
  Eigen::Vector3d rhs(const Eigen::Vector3d& s) const {
    return {s[1], mu * (1.0 - s[0] * s[0]) * s[1] - s[0], mu * (1.0 - s[0] * s[0])};
  }
  Eigen::Vector3d rk4(const Eigen::Vector3d& s, double h) const {
    const Eigen::Vector3d k1 = rhs(s);
    const Eigen::Vector3d k2 = rhs(s + 0.5 * h * k1);
    const Eigen::Vector3d k3 = rhs(s + 0.5 * h * k2);
    const Eigen::Vector3d k4 = rhs(s + h * k3);
    return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  struct Return {
    double x1 = 0.0;
    double period = 0.0;
    double log_multiplier = 0.0;
  };

  // From (x1, 0) until x2 next goes from + to -.
  Return first_return(double x1, double h) const {
    Eigen::Vector3d s(x1, 0.0, 0.0);
    double t = 0.0;
    bool armed = false;
    for (long it = 0; it < 10'000'000; ++it) {
      const Eigen::Vector3d next = rk4(s, h);
      if (armed && next[1] <= 0.0) {
        double a = 0.0, fa = s[1];
        double b = h, fb = next[1];
        for (int k = 0; k < 60 && std::abs(b - a) > 1e-17; ++k) {
          const double c = b - fb * (b - a) / (fb - fa);
          a = b;
          fa = fb;
          b = c;
          fb = rk4(s, b)[1];
          if (fb == 0.0) break;
        }
        const Eigen::Vector3d hit = rk4(s, b);
        return {hit[0], t + b, hit[2]};
      }
      if (next[1] > 0.0) armed = true;
      s = next;
      t += h;
    }
    throw Error(ErrorKind::InfiniteTimeToImpact, "reference orbit did not return");
  }
};

std::optional<OraclePack> vdp_oracle(double mu) {
  OraclePack o;
  o.asymptotic_period = 2.0 * std::numbers::pi * (1.0 + mu * mu / 16.0);
  o.T_band_rel = 5e-3;
  if (mu == 0.0) {
    o.x_star = vec2(2.0, 0.0);
    o.T_star = 2.0 * std::numbers::pi;
    o.T_band_rel = 0.0;
    o.eigenvalue = 1.0;
    o.note = "harmonic oscillator: every circle is periodic, return map is the identity";
    return o;
  }
  const VdpRef ref{mu};
  const double h = 2.5e-4;
  auto G = [&](double x1) { return ref.first_return(x1, h).x1 - x1; };
  double a = 2.0, b = 2.0 + 1e-3;
  double ga = G(a), gb = G(b);
  for (int k = 0; k < 40 && std::abs(gb) > 1e-13; ++k) {
    const double c = b - gb * (b - a) / (gb - ga);
    a = b;
    ga = gb;
    b = c;
    gb = G(b);
  }
  const auto ret = ref.first_return(b, h);
  o.x_star = vec2(b, 0.0);
  o.T_star = ret.period;
  o.eigenvalue = std::exp(ret.log_multiplier);
  o.note = "fixed-step RK4 reference (h = 2.5e-4), multiplier from the divergence integral";
  return o;
}

double rimless_omega_star(double alpha, double gamma, double gl) {
  const double s2 = std::sin(2.0 * alpha);
  return std::sqrt(4.0 * gl * std::sin(alpha) * std::sin(gamma) / (s2 * s2));
}

// Stance duration from energy conservation: T = integral of d(theta) / omega(theta), composite
// Simpson in theta.
double rimless_period(double alpha, double gamma, double gl, double omega_minus) {
  const double omega_plus = std::cos(2.0 * alpha) * omega_minus;
  const double a = gamma - alpha, b = gamma + alpha;
  auto inv_speed = [&](double th) {
    return 1.0 / std::sqrt(omega_plus * omega_plus + 2.0 * gl * (std::cos(a) - std::cos(th)));
  };
  const int n = 200'000;
  const double h = (b - a) / n;
  double sum = inv_speed(a) + inv_speed(b);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * inv_speed(a + i * h);
  return sum * h / 3.0;
}

std::vector<ModelCatalogEntry> build_catalog() {
  std::vector<ModelCatalogEntry> c;
  {
    ModelCatalogEntry e;
    e.name = "linear-reset";
    e.description = "x1' = 1, x2' = -a x2 + u; H = 1 - x1; reset (0, x2 + v)";
    e.params = {{"a", std::numbers::ln2, 0.0, 100.0, true, false, "decay rate of x2"}};
    e.assumptions = "smooth data, reset strictly inside S+, transversal impacts, single impact per period";
    e.u_scale = 1.0;
    e.v_scale = 1.0;
    c.push_back(e);
  }
  {
    ModelCatalogEntry e;
    e.name = "rimless-wheel";
    e.description =
        "theta'' = (g/l) sin(theta) + u; H = (gamma + alpha) - theta; "
        "reset (gamma - alpha, cos(2 alpha) omega + v)";
    e.params = {{"alpha", std::numbers::pi / 8.0, 0.0, std::numbers::pi / 4.0, true, true, "half inter-leg angle"},
                {"gamma", 0.08, 0.0, std::numbers::pi / 2.0, true, true, "slope angle"},
                {"g_over_l", 9.81, 0.0, 1e4, true, false, "gravity over leg length"}};
    e.assumptions = "smooth data, reset strictly inside S+, transversal impacts, single impact per period";
    e.u_scale = 1.0;
    e.v_scale = 0.2;
    c.push_back(e);
  }
  {
    ModelCatalogEntry e;
    e.name = "vdp-adapter";
    e.description =
        "x1' = x2, x2' = mu (1 - x1^2) x2 - x1 + u; section H = x2 crossed downward (x1 > 0); "
        "identity reset, v ignored";
    e.params = {{"mu", 0.2, 0.0, 5.0, false, false, "nonlinearity"}};
    e.assumptions =
        "continuous limit cycle wrapped with an identity reset; the downward crossing direction gates the "
        "section to the x1 > 0 half so the cycle meets it once";
    e.u_scale = 1.0;
    e.v_scale = 0.0;
    c.push_back(e);
  }
  {
    ModelCatalogEntry e;
    e.name = "bouncing-ball";
    e.description = "x1' = x2, x2' = -g + u; H = x1; reset (0, -e x2 + v)";
    e.params = {{"g", 9.81, 0.0, 1e3, true, false, "gravity"},
                {"restitution", 0.5, 0.0, 1.0, false, true, "coefficient of restitution"}};
    e.assumptions =
        "negative control: the reset lands on S rather than in S+, there is no periodic orbit and impacts "
        "accumulate in finite time (Zeno)";
    e.u_scale = 1.0;
    e.v_scale = 1.0;
    e.negative_control = true;
    c.push_back(e);
  }
  return c;
}

}  // namespace

const std::vector<ModelCatalogEntry>& catalog() {
  static const std::vector<ModelCatalogEntry> c = build_catalog();
  return c;
}

const ModelCatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : catalog()) {
    if (e.name == name) return e;
  }
  throw Error(ErrorKind::UnknownModel, "unknown model '" + name + "'");
}

ParamMap resolve_params(const std::string& name, const ParamMap& given) {
  const ModelCatalogEntry& e = catalog_entry(name);
  ParamMap out;
  for (const auto& p : e.params) out[p.name] = p.default_value;
  for (const auto& [key, value] : given) {
    const ParamSpec* spec = find_spec(e, key);
    if (!spec) throw Error(ErrorKind::InvalidConfig, "model '" + name + "' has no parameter '" + key + "'");
    const bool low_ok = spec->min_exclusive ? value > spec->min : value >= spec->min;
    const bool high_ok = spec->max_exclusive ? value < spec->max : value <= spec->max;
    if (!std::isfinite(value) || !low_ok || !high_ok) {
      std::ostringstream msg;
      msg << "parameter '" << key << "' = " << value << " outside " << (spec->min_exclusive ? "(" : "[")
          << spec->min << ", " << spec->max << (spec->max_exclusive ? ")" : "]");
      throw Error(ErrorKind::ParamOutOfRange, msg.str(), std::numeric_limits<double>::quiet_NaN(), -1, value);
    }
    out[key] = value;
  }
  return out;
}

HybridSystemDef model(const std::string& name, const ParamMap& given) {
  const ParamMap p = resolve_params(name, given);
  HybridSystemDef s;
  s.name = name;
  s.n = 2;
  s.p = 1;
  s.q = 1;
  if (name == "linear-reset") {
    const double a = p.at("a");
    s.f = [a](const State& x, const Input& u) { return vec2(1.0, -a * x[1] + u[0]); };
    s.h = [](const State& x) { return 1.0 - x[0]; };
    s.grad_h = [](const State&) { return vec2(-1.0, 0.0); };
    s.delta = [](const State& x, const Input& v) { return vec2(0.0, x[1] + v[0]); };
  } else if (name == "rimless-wheel") {
    const double alpha = p.at("alpha"), gamma = p.at("gamma"), gl = p.at("g_over_l");
    const double c2a = std::cos(2.0 * alpha);
    s.f = [gl](const State& x, const Input& u) { return vec2(x[1], gl * std::sin(x[0]) + u[0]); };
    s.h = [alpha, gamma](const State& x) { return gamma + alpha - x[0]; };
    s.grad_h = [](const State&) { return vec2(-1.0, 0.0); };
    s.delta = [alpha, gamma, c2a](const State& x, const Input& v) {
      return vec2(gamma - alpha, c2a * x[1] + v[0]);
    };
  } else if (name == "vdp-adapter") {
    const double mu = p.at("mu");
    s.f = [mu](const State& x, const Input& u) {
      return vec2(x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0]);
    };
    s.h = [](const State& x) { return x[1]; };
    s.grad_h = [](const State&) { return vec2(0.0, 1.0); };
    s.delta = [](const State& x, const Input&) { return x; };
    s.continuous_adapter = true;
  } else if (name == "bouncing-ball") {
    const double g = p.at("g"), e = p.at("restitution");
    s.f = [g](const State& x, const Input& u) { return vec2(x[1], -g + u[0]); };
    s.h = [](const State& x) { return x[0]; };
    s.grad_h = [](const State&) { return vec2(1.0, 0.0); };
    s.delta = [e](const State& x, const Input& v) { return vec2(0.0, -e * x[1] + v[0]); };
  } else {
    throw Error(ErrorKind::UnknownModel, "unknown model '" + name + "'");
  }
  return s;
}

std::optional<OraclePack> oracle(const std::string& name, const ParamMap& given) {
  const ParamMap p = resolve_params(name, given);
  if (name == "linear-reset") {
    const double a = p.at("a");
    OraclePack o;
    o.x_star = vec2(1.0, 0.0);
    o.T_star = 1.0;
    o.eigenvalue = std::exp(-a);
    o.forced_gain = 1.0 / a;
    o.note = "variation of constants: x2 decays by exp(-a) per unit-time step";
    return o;
  }
  if (name == "rimless-wheel") {
    const double alpha = p.at("alpha"), gamma = p.at("gamma"), gl = p.at("g_over_l");
    const double w = rimless_omega_star(alpha, gamma, gl);
    const double c = std::cos(2.0 * alpha);
    OraclePack o;
    const double w_plus = c * w;
    if (gamma < alpha && 0.5 * w_plus * w_plus <= gl * (1.0 - std::cos(gamma - alpha))) {
      o.note = "no walking cycle: the post-impact speed at the energy-balance fixed point cannot carry the "
               "wheel over the vertical";
      return o;
    }
    o.x_star = vec2(gamma + alpha, w);
    o.T_star = rimless_period(alpha, gamma, gl, w);
    o.eigenvalue = c * c;
    o.note = "energy balance over the stance phase; map derivative cos^2(2 alpha)";
    return o;
  }
  if (name == "vdp-adapter") return vdp_oracle(p.at("mu"));
  if (name == "bouncing-ball") return std::nullopt;
  throw Error(ErrorKind::UnknownModel, "unknown model '" + name + "'");
}

State default_guess(const std::string& name, const ParamMap& given) {
  const ParamMap p = resolve_params(name, given);
  if (name == "linear-reset") return vec2(1.0, 0.3);
  if (name == "rimless-wheel") {
    const double w = rimless_omega_star(p.at("alpha"), p.at("gamma"), p.at("g_over_l"));
    return vec2(p.at("gamma") + p.at("alpha"), 0.95 * w);
  }
  if (name == "vdp-adapter") return vec2(2.0, 0.0);
  if (name == "bouncing-ball") return vec2(0.0, -1.0);
  throw Error(ErrorKind::UnknownModel, "unknown model '" + name + "'");
}

RegistrationCheck check_registration(const std::string& name, const ParamMap& given) {
  const HybridSystemDef sys = model(name, given);
  const auto o = oracle(name, given);
  RegistrationCheck r;
  if (!o || !o->x_star) {
    // Probe a generic impact state instead: the reset of a downward impact.
    const State x = default_guess(name, given);
    r.h_after_reset = sys.eval_h(sys.eval_delta(x, sys.zero_v()));
    r.lfh = sys.lie_derivative(x, sys.zero_u());
    r.reset_in_splus = r.h_after_reset > 0.0;
    r.transversal = r.lfh < 0.0;
    r.note = "no periodic orbit";
    return r;
  }
  const State& xs = *o->x_star;
  r.has_fixed_point = true;
  r.h_after_reset = sys.eval_h(sys.eval_delta(xs, sys.zero_v()));
  r.lfh = sys.lie_derivative(xs, sys.zero_u());
  r.transversal = r.lfh < 0.0;
  if (sys.continuous_adapter) {
    // Identity reset: the section is left immediately (transversality) and re-entered from S+
    // half a cycle later, which the crossing-direction filter relies on.
    r.reset_in_splus = std::abs(r.h_after_reset) <= 1e-12 && r.transversal;
    r.note = "continuous adapter: reset lands on S by construction";
  } else {
    r.reset_in_splus = r.h_after_reset > 0.0;
  }
  return r;
}

}  // namespace sie
