#include "sie/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace sie {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

/// Strict object reader: every key must be consumed before finish().
class Reader {
 public:
  Reader(const Json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) fail(ctx_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number()) fail(ctx_ + "." + key + " must be a number");
    return v.get<double>();
  }
  template <class Int>
  Int integer(const std::string& key, Int fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(ctx_ + "." + key + " must be an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
      const auto s = v.get<std::int64_t>();
      if (s < 0) fail(ctx_ + "." + key + " must be non-negative");
      return static_cast<Int>(s);
    } else {
      return static_cast<Int>(v.get<std::int64_t>());
    }
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) fail(ctx_ + "." + key + " must be a boolean");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_string()) fail(ctx_ + "." + key + " must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    return number_list(at(key), ctx_ + "." + key);
  }

  static std::vector<double> number_list(const Json& v, const std::string& what) {
    if (!v.is_array()) fail(what + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(what + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail("unknown key '" + key + "' in " + ctx_);
    }
  }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> used_;
};

Json list_to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Json vector_to_json(const Eigen::VectorXd& v) { return list_to_json(to_std(v)); }

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  const auto v = Reader::number_list(j, what);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json signal_to_json(const ContinuousSignal& s) {
  Json j = Json::object();
  switch (s.kind()) {
    case ContinuousSignal::Kind::Zero:
      j["kind"] = "zero";
      j["dim"] = s.dim();
      break;
    case ContinuousSignal::Kind::Constant:
      j["kind"] = "constant";
      j["value"] = vector_to_json(s.value());
      break;
    case ContinuousSignal::Kind::Sinusoid:
      j["kind"] = "sinusoid";
      j["amplitude"] = vector_to_json(s.value());
      j["omega"] = s.omega();
      j["phase"] = s.phase();
      break;
    case ContinuousSignal::Kind::Tabulated: {
      j["kind"] = "tabulated";
      j["times"] = list_to_json(s.times());
      Json vals = Json::array();
      for (const auto& v : s.samples()) vals.push_back(vector_to_json(v));
      j["values"] = vals;
      break;
    }
    case ContinuousSignal::Kind::Composite: {
      j["kind"] = "composite";
      Json terms = Json::array();
      for (const auto& t : s.terms()) terms.push_back(signal_to_json(t));
      j["terms"] = terms;
      break;
    }
  }
  return j;
}

ContinuousSignal signal_from_json(const Json& j) {
  Reader r(j, "continuous input");
  const std::string kind = r.string("kind", "");
  ContinuousSignal out = ContinuousSignal::zero(1);
  if (kind == "zero") {
    out = ContinuousSignal::zero(r.integer<int>("dim", 1));
  } else if (kind == "constant") {
    if (!r.has("value")) fail("constant input needs 'value'");
    out = ContinuousSignal::constant(vector_from_json(r.at("value"), "value"));
  } else if (kind == "sinusoid") {
    if (!r.has("amplitude") || !r.has("omega")) fail("sinusoid input needs 'amplitude' and 'omega'");
    const Input amp = vector_from_json(r.at("amplitude"), "amplitude");
    const double omega = r.number("omega", 0.0);
    out = ContinuousSignal::sinusoid(amp, omega, r.number("phase", 0.0));
  } else if (kind == "tabulated") {
    if (!r.has("times") || !r.has("values")) fail("tabulated input needs 'times' and 'values'");
    std::vector<double> times = r.numbers("times", {});
    const Json& vals = r.at("values");
    if (!vals.is_array()) fail("tabulated 'values' must be an array");
    std::vector<Input> samples;
    for (const auto& v : vals) samples.push_back(vector_from_json(v, "values[]"));
    out = ContinuousSignal::tabulated(std::move(times), std::move(samples));
  } else if (kind == "composite") {
    if (!r.has("terms") || !r.at("terms").is_array()) fail("composite input needs a 'terms' array");
    std::vector<ContinuousSignal> terms;
    for (const auto& t : r.at("terms")) terms.push_back(signal_from_json(t));
    out = ContinuousSignal::composite(std::move(terms));
  } else {
    fail("unknown continuous input kind '" + kind + "'");
  }
  r.finish();
  return out;
}

Json sequence_to_json(const DiscreteSequence& s) {
  Json j = Json::object();
  switch (s.kind()) {
    case DiscreteSequence::Kind::Zero:
      j["kind"] = "zero";
      j["dim"] = s.dim();
      break;
    case DiscreteSequence::Kind::Constant:
      j["kind"] = "constant";
      j["value"] = vector_to_json(s.value());
      break;
    case DiscreteSequence::Kind::IidUniform:
      j["kind"] = "iid-uniform";
      j["bound"] = vector_to_json(s.value());
      j["seed"] = s.seed();
      break;
    case DiscreteSequence::Kind::Explicit: {
      j["kind"] = "explicit";
      Json vals = Json::array();
      for (const auto& v : s.values()) vals.push_back(vector_to_json(v));
      j["values"] = vals;
      break;
    }
  }
  return j;
}

DiscreteSequence sequence_from_json(const Json& j) {
  Reader r(j, "discrete input");
  const std::string kind = r.string("kind", "");
  DiscreteSequence out = DiscreteSequence::zero(1);
  if (kind == "zero") {
    out = DiscreteSequence::zero(r.integer<int>("dim", 1));
  } else if (kind == "constant") {
    if (!r.has("value")) fail("constant discrete input needs 'value'");
    out = DiscreteSequence::constant(vector_from_json(r.at("value"), "value"));
  } else if (kind == "iid-uniform") {
    if (!r.has("bound")) fail("iid-uniform discrete input needs 'bound'");
    const Input bound = vector_from_json(r.at("bound"), "bound");
    out = DiscreteSequence::iid_uniform(bound, r.integer<std::uint64_t>("seed", 0));
  } else if (kind == "explicit") {
    if (!r.has("values") || !r.at("values").is_array()) fail("explicit discrete input needs a 'values' array");
    std::vector<Input> vals;
    for (const auto& v : r.at("values")) vals.push_back(vector_from_json(v, "values[]"));
    out = DiscreteSequence::explicit_values(std::move(vals));
  } else {
    fail("unknown discrete input kind '" + kind + "'");
  }
  r.finish();
  return out;
}

FixedPointConfig RunConfig::fixed_point() const {
  FixedPointConfig fp;
  fp.solver = SolverConfig::tight();
  fp.solver.events = events;
  fp.solver.integ.max_step = integrator.max_step;
  fp.solver.integ.max_steps = integrator.max_steps;
  fp.solver.integ.blowup_norm = integrator.blowup_norm;
  fp.newton_tol = orbit.newton_tol;
  fp.max_iter = orbit.max_iter;
  fp.max_halvings = orbit.max_halvings;
  fp.margin = orbit.margin;
  fp.chart_index = orbit.chart_index;
  return fp;
}

RunConfig parse_config(const Json& j) {
  RunConfig c;
  Reader root(j, "config");

  if (!root.has("model")) fail("config needs a 'model' block");
  {
    Reader m(root.at("model"), "model");
    c.model = m.string("name", "");
    if (c.model.empty()) fail("model.name is required");
    ParamMap given;
    if (m.has("params")) {
      const Json& p = m.at("params");
      if (!p.is_object()) fail("model.params must be an object");
      for (const auto& [key, value] : p.items()) {
        if (!value.is_number()) fail("model.params." + key + " must be a number");
        given[key] = value.get<double>();
      }
    }
    m.finish();
    c.params = resolve_params(c.model, given);
  }
  const HybridSystemDef sys = model(c.model, c.params);

  c.seed = root.integer<std::uint64_t>("seed", 0);
  if (root.has("out")) c.out = root.string("out", "");

  c.u = ContinuousSignal::zero(sys.p);
  c.v = DiscreteSequence::zero(sys.q);
  if (root.has("input")) {
    Reader in(root.at("input"), "input");
    if (in.has("u")) {
      c.u = signal_from_json(in.at("u"));
      c.u_given = true;
    }
    if (in.has("v")) {
      c.v = sequence_from_json(in.at("v"));
      c.v_given = true;
    }
    in.finish();
  }
  if (c.u.dim() != sys.p) fail("input.u has dimension " + std::to_string(c.u.dim()) + ", model expects " + std::to_string(sys.p));
  if (c.v.dim() != sys.q) fail("input.v has dimension " + std::to_string(c.v.dim()) + ", model expects " + std::to_string(sys.q));

  if (root.has("integrator")) {
    Reader r(root.at("integrator"), "integrator");
    c.integrator.rtol = r.number("rtol", c.integrator.rtol);
    c.integrator.atol = r.number("atol", c.integrator.atol);
    c.integrator.max_step = r.number("max_step", c.integrator.max_step);
    c.integrator.max_steps = r.integer<std::size_t>("max_steps", c.integrator.max_steps);
    c.integrator.blowup_norm = r.number("blowup_norm", c.integrator.blowup_norm);
    r.finish();
  }
  c.integrator.validate();
  if (root.has("events")) {
    Reader r(root.at("events"), "events");
    c.events.event_tol = r.number("event_tol", c.events.event_tol);
    c.events.graze_rel = r.number("graze_rel", c.events.graze_rel);
    c.events.t_cap = r.number("t_cap", c.events.t_cap);
    c.events.samples_per_step = r.integer<int>("samples_per_step", c.events.samples_per_step);
    c.events.bisect_rel = r.number("bisect_rel", c.events.bisect_rel);
    r.finish();
  }
  c.events.validate();
  if (root.has("guards")) {
    Reader r(root.at("guards"), "guards");
    c.guards.enabled = r.boolean("enabled", c.guards.enabled);
    c.guards.k_max = r.integer<std::size_t>("k_max", c.guards.k_max);
    c.guards.min_dwell = r.number("min_dwell", c.guards.min_dwell);
    c.guards.zeno_window = r.integer<int>("zeno_window", c.guards.zeno_window);
    c.guards.zeno_ratio = r.number("zeno_ratio", c.guards.zeno_ratio);
    if (r.has("period_hint")) c.guards.period_hint = r.number("period_hint", 0.0);
    r.finish();
  }
  if (c.guards.k_max < 1) fail("guards.k_max must be >= 1");
  if (!(c.guards.zeno_ratio > 0.0 && c.guards.zeno_ratio < 1.0)) fail("guards.zeno_ratio must lie in (0, 1)");

  if (root.has("simulate")) {
    Reader r(root.at("simulate"), "simulate");
    c.simulate.t_final = r.number("t_final", c.simulate.t_final);
    if (r.has("x0")) c.simulate.x0 = r.numbers("x0", {});
    if (r.has("sample_dt")) c.simulate.sample_dt = r.number("sample_dt", 0.0);
    if (r.has("orbit_file")) c.simulate.orbit_file = r.string("orbit_file", "");
    r.finish();
  }
  if (!(c.simulate.t_final > 0.0)) fail("simulate.t_final must be > 0");
  if (c.simulate.x0 && static_cast<int>(c.simulate.x0->size()) != sys.n) fail("simulate.x0 has the wrong dimension");
  if (c.simulate.sample_dt && !(*c.simulate.sample_dt > 0.0)) fail("simulate.sample_dt must be > 0");

  if (root.has("orbit")) {
    Reader r(root.at("orbit"), "orbit");
    if (r.has("guess")) c.orbit.guess = r.numbers("guess", {});
    if (r.has("chart_index")) c.orbit.chart_index = r.integer<int>("chart_index", 0);
    c.orbit.newton_tol = r.number("newton_tol", c.orbit.newton_tol);
    c.orbit.max_iter = r.integer<int>("max_iter", c.orbit.max_iter);
    c.orbit.max_halvings = r.integer<int>("max_halvings", c.orbit.max_halvings);
    c.orbit.margin = r.number("margin", c.orbit.margin);
    c.orbit.ds_rel = r.number("ds_rel", c.orbit.ds_rel);
    c.orbit.closure_tol = r.number("closure_tol", c.orbit.closure_tol);
    r.finish();
  }
  if (c.orbit.guess && static_cast<int>(c.orbit.guess->size()) != sys.n) fail("orbit.guess has the wrong dimension");
  if (c.orbit.chart_index && (*c.orbit.chart_index < 0 || *c.orbit.chart_index >= sys.n)) fail("orbit.chart_index out of range");
  if (!(c.orbit.newton_tol > 0.0) || c.orbit.max_iter < 1 || c.orbit.max_halvings < 0 || !(c.orbit.margin >= 0.0) ||
      !(c.orbit.ds_rel > 0.0) || !(c.orbit.closure_tol > 0.0)) {
    fail("orbit block has out-of-range values");
  }

  if (root.has("certify")) {
    Reader r(root.at("certify"), "certify");
    c.certify.samples = r.integer<std::size_t>("samples", c.certify.samples);
    c.certify.decades = r.integer<int>("decades", c.certify.decades);
    c.certify.per_decade = r.integer<int>("per_decade", c.certify.per_decade);
    c.certify.far_field = r.boolean("far_field", c.certify.far_field);
    if (r.has("radii")) c.certify.radii = r.numbers("radii", {});
    r.finish();
  }
  if (c.certify.decades < 0 || c.certify.per_decade < 1) fail("certify.decades must be >= 0 and per_decade >= 1");
  if (c.certify.radii && c.certify.radii->empty()) fail("certify.radii must not be empty");

  if (root.has("sweep")) {
    Reader r(root.at("sweep"), "sweep");
    c.sweep.offsets = r.numbers("offsets", c.sweep.offsets);
    c.sweep.u_amps = r.numbers("u_amps", c.sweep.u_amps);
    c.sweep.v_amps = r.numbers("v_amps", c.sweep.v_amps);
    c.sweep.relative = r.boolean("relative", c.sweep.relative);
    c.sweep.paired = r.boolean("paired", c.sweep.paired);
    c.sweep.trials = r.integer<std::size_t>("trials", c.sweep.trials);
    c.sweep.horizon_periods = r.number("horizon_periods", c.sweep.horizon_periods);
    c.sweep.cutoff = r.number("cutoff", c.sweep.cutoff);
    c.sweep.window_samples = r.integer<int>("window_samples", c.sweep.window_samples);
    c.sweep.F_max = r.number("F_max", c.sweep.F_max);
    c.sweep.zero_floor = r.number("zero_floor", c.sweep.zero_floor);
    r.finish();
  }
  {
    SweepConfig probe;
    probe.offsets = c.sweep.offsets;
    probe.u_amps = c.sweep.u_amps;
    probe.v_amps = c.sweep.v_amps;
    probe.paired = c.sweep.paired;
    probe.trials = c.sweep.trials;
    probe.horizon_periods = c.sweep.horizon_periods;
    probe.cutoff = c.sweep.cutoff;
    probe.window_samples = c.sweep.window_samples;
    probe.validate();
  }

  if (root.has("validate")) {
    Reader r(root.at("validate"), "validate");
    if (r.has("probes")) {
      const Json& p = r.at("probes");
      if (!p.is_array()) fail("validate.probes must be an array of states");
      std::vector<std::vector<double>> probes;
      for (const auto& e : p) {
        probes.push_back(Reader::number_list(e, "validate.probes[]"));
        if (static_cast<int>(probes.back().size()) != sys.n) fail("validate.probes entry has the wrong dimension");
      }
      c.validate.probes = std::move(probes);
    }
    c.validate.random_probes = r.integer<std::size_t>("random_probes", c.validate.random_probes);
    c.validate.radius = r.number("radius", c.validate.radius);
    c.validate.grad_tol = r.number("grad_tol", c.validate.grad_tol);
    r.finish();
  }

  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config file '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, false);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = parse_config(j);
  c.base_dir = path.parent_path();
  return c;
}

Json to_json(const RunConfig& c) {
  Json j = Json::object();
  Json params = Json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  j["model"] = {{"name", c.model}, {"params", params}};
  j["seed"] = c.seed;
  if (c.out) j["out"] = *c.out;
  Json input = Json::object();
  if (c.u_given) input["u"] = signal_to_json(c.u);
  if (c.v_given) input["v"] = sequence_to_json(c.v);
  if (!input.empty()) j["input"] = input;
  j["integrator"] = {{"rtol", c.integrator.rtol},
                     {"atol", c.integrator.atol},
                     {"max_step", c.integrator.max_step},
                     {"max_steps", c.integrator.max_steps},
                     {"blowup_norm", c.integrator.blowup_norm}};
  if (!std::isfinite(c.integrator.max_step)) j["integrator"].erase("max_step");
  j["events"] = {{"event_tol", c.events.event_tol},
                 {"graze_rel", c.events.graze_rel},
                 {"t_cap", c.events.t_cap},
                 {"samples_per_step", c.events.samples_per_step},
                 {"bisect_rel", c.events.bisect_rel}};
  j["guards"] = {{"enabled", c.guards.enabled},
                 {"k_max", c.guards.k_max},
                 {"min_dwell", c.guards.min_dwell},
                 {"zeno_window", c.guards.zeno_window},
                 {"zeno_ratio", c.guards.zeno_ratio}};
  if (c.guards.period_hint) j["guards"]["period_hint"] = *c.guards.period_hint;
  Json sim = {{"t_final", c.simulate.t_final}};
  if (c.simulate.x0) sim["x0"] = list_to_json(*c.simulate.x0);
  if (c.simulate.sample_dt) sim["sample_dt"] = *c.simulate.sample_dt;
  if (c.simulate.orbit_file) sim["orbit_file"] = *c.simulate.orbit_file;
  j["simulate"] = sim;
  Json orb = Json::object();
  if (c.orbit.guess) orb["guess"] = list_to_json(*c.orbit.guess);
  if (c.orbit.chart_index) orb["chart_index"] = *c.orbit.chart_index;
  orb["newton_tol"] = c.orbit.newton_tol;
  orb["max_iter"] = c.orbit.max_iter;
  orb["max_halvings"] = c.orbit.max_halvings;
  orb["margin"] = c.orbit.margin;
  orb["ds_rel"] = c.orbit.ds_rel;
  orb["closure_tol"] = c.orbit.closure_tol;
  j["orbit"] = orb;
  Json cert = {{"samples", c.certify.samples},
               {"decades", c.certify.decades},
               {"per_decade", c.certify.per_decade},
               {"far_field", c.certify.far_field}};
  if (c.certify.radii) cert["radii"] = list_to_json(*c.certify.radii);
  j["certify"] = cert;
  j["sweep"] = {{"offsets", list_to_json(c.sweep.offsets)},
                {"u_amps", list_to_json(c.sweep.u_amps)},
                {"v_amps", list_to_json(c.sweep.v_amps)},
                {"relative", c.sweep.relative},
                {"paired", c.sweep.paired},
                {"trials", c.sweep.trials},
                {"horizon_periods", c.sweep.horizon_periods},
                {"cutoff", c.sweep.cutoff},
                {"window_samples", c.sweep.window_samples},
                {"F_max", c.sweep.F_max},
                {"zero_floor", c.sweep.zero_floor}};
  Json val = Json::object();
  if (c.validate.probes) {
    Json p = Json::array();
    for (const auto& x : *c.validate.probes) p.push_back(list_to_json(x));
    val["probes"] = p;
  }
  val["random_probes"] = c.validate.random_probes;
  val["radius"] = c.validate.radius;
  val["grad_tol"] = c.validate.grad_tol;
  j["validate"] = val;
  return j;
}

Json report_to_json(const StabilityReport& r) {
  Json j = Json::object();
  j["x_star"] = vector_to_json(r.x_star);
  j["T_star"] = r.T_star;
  j["chart_index"] = r.chart_index;
  j["converged"] = r.converged;
  j["newton_residuals"] = list_to_json(r.newton_residuals);
  Json its = Json::array();
  for (const auto& z : r.newton_iterates) its.push_back(vector_to_json(z));
  j["newton_iterates"] = its;
  auto mat = [](const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
    return rows;
  };
  j["jacobian"] = mat(r.jacobian);
  j["jacobian_half"] = mat(r.jacobian_half);
  j["fd_step"] = r.fd_step;
  j["richardson_diff"] = r.richardson_diff;
  j["richardson_bound"] = r.richardson_bound;
  j["richardson_consistent"] = r.richardson_consistent();
  Json eig = Json::array();
  for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) {
    eig.push_back(Json::array({r.eigenvalues[i].real(), r.eigenvalues[i].imag()}));
  }
  j["eigenvalues"] = eig;
  j["spectral_radius"] = r.spectral_radius;
  j["verdict"] = std::string(to_string(r.verdict));
  return j;
}

StabilityReport report_from_json(const Json& j) {
  StabilityReport r;
  try {
    r.x_star = vector_from_json(j.at("x_star"), "x_star");
    r.T_star = j.at("T_star").get<double>();
    r.chart_index = j.at("chart_index").get<int>();
    r.converged = j.at("converged").get<bool>();
    if (j.contains("spectral_radius")) r.spectral_radius = j.at("spectral_radius").get<double>();
    if (j.contains("verdict")) {
      const auto v = j.at("verdict").get<std::string>();
      r.verdict = v == "LES" ? Verdict::LES : v == "LAS-marginal" ? Verdict::LASMarginal : Verdict::Unstable;
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed orbit report: ") + e.what());
  }
  return r;
}

}  // namespace sie
