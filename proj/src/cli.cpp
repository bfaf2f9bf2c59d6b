#include "sie/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sie/config.hpp"
#include "sie/orbit.hpp"
#include "sie/parallel.hpp"
#include "sie/rng.hpp"

namespace sie::cli {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path.string() + "'");
    write(header);
  }
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct Row {
  std::vector<std::string> cells;
  Row& num(double x) {
    cells.push_back(format_number(x));
    return *this;
  }
  Row& integer(long long x) {
    cells.push_back(std::to_string(x));
    return *this;
  }
  Row& vec(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) num(v[i]);
    return *this;
  }
};

std::vector<std::string> indexed(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json params_json(const RunConfig& c) {
  Json p = Json::object();
  for (const auto& [k, v] : c.params) p[k] = v;
  return p;
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

State std_to_state(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Oracle fixed point when one exists, else the model's default guess.
State reference_state(const RunConfig& c) {
  if (c.orbit.guess) return std_to_state(*c.orbit.guess);
  const auto o = oracle(c.model, c.params);
  if (o && o->x_star) return *o->x_star;
  return default_guess(c.model, c.params);
}

State fixed_point_guess(const RunConfig& c) {
  if (c.orbit.guess) return std_to_state(*c.orbit.guess);
  return default_guess(c.model, c.params);
}

struct Context {
  RunConfig cfg;
  HybridSystemDef sys;
  fs::path out_dir;
  int threads = 1;
  std::ostream& out;
  std::ostream& err;
};

void write_newton_trace(const Context& ctx, const NewtonDivergedError& e) {
  const int m = e.iterates().empty() ? 0 : static_cast<int>(e.iterates().front().size());
  std::vector<std::string> header{"iteration", "residual"};
  append(header, indexed("z_", m));
  CsvWriter w(ctx.out_dir / "newton_trace.csv", header);
  for (std::size_t i = 0; i < e.iterates().size(); ++i) {
    Row r;
    r.integer(static_cast<long long>(i)).num(i < e.residuals().size() ? e.residuals()[i] : NAN).vec(e.iterates()[i]);
    w.write(r.cells);
  }
}

StabilityReport solve_orbit(Context& ctx) {
  const FixedPointConfig fp = ctx.cfg.fixed_point();
  try {
    return linearize(ctx.sys, find_fixed_point(ctx.sys, fixed_point_guess(ctx.cfg), fp), fp);
  } catch (const NewtonDivergedError& e) {
    write_newton_trace(ctx, e);
    throw;
  }
}

OrbitConfig orbit_config(const RunConfig& c) {
  OrbitConfig oc;
  oc.solver = c.fixed_point().solver;
  oc.ds_rel = c.orbit.ds_rel;
  oc.closure_tol = c.orbit.closure_tol;
  return oc;
}

// ---------------------------------------------------------------------------

int cmd_simulate(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const HybridSystemDef& sys = ctx.sys;
  const SolverConfig solver = c.solver();
  const State x0 = c.simulate.x0 ? std_to_state(*c.simulate.x0) : sys.eval_delta(reference_state(c), sys.zero_v());
  DiscreteSequence v = c.v;
  if (v.kind() == DiscreteSequence::Kind::IidUniform) v = v.reseeded(derive_seed(c.seed, v.seed()));

  std::optional<PeriodicOrbit> orbit;
  if (c.simulate.orbit_file) {
    fs::path p = *c.simulate.orbit_file;
    if (p.is_relative()) p = c.base_dir / p;
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open orbit file '" + p.string() + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, std::string("orbit file is not valid JSON: ") + e.what());
    }
    if (!j.contains("report")) throw Error(ErrorKind::InvalidConfig, "orbit file lacks a 'report' block");
    orbit = build_orbit(sys, report_from_json(j.at("report")), orbit_config(c));
  }

  GuardConfig guards = c.guards;
  if (!guards.period_hint && orbit) guards.period_hint = orbit->T_star();
  const HybridTrajectory traj = simulate(sys, x0, c.u, v, c.simulate.t_final, guards, solver);

  std::vector<std::string> header{"t"};
  append(header, indexed("x_", sys.n));
  if (orbit) header.push_back("dist_to_orbit");
  header.push_back("segment_index");
  CsvWriter tw(ctx.out_dir / "trajectory.csv", header);
  const double dt = c.simulate.sample_dt ? *c.simulate.sample_dt : c.simulate.t_final / 1000.0;
  for (std::size_t s = 0; s < traj.segments.size(); ++s) {
    const FlowSegment& seg = traj.segments[s];
    std::vector<double> times{seg.t0()};
    for (double k = std::floor(seg.t0() / dt) + 1.0;; k += 1.0) {
      const double t = k * dt;
      if (t >= seg.t1()) break;
      times.push_back(t);
    }
    if (seg.t1() > seg.t0()) times.push_back(seg.t1());
    for (double t : times) {
      const State x = seg.eval(t);
      Row r;
      r.num(t).vec(x);
      if (orbit) r.num(dist_to_orbit(*orbit, x).d);
      r.integer(static_cast<long long>(s));
      tw.write(r.cells);
    }
  }

  header = {"k", "t_k"};
  append(header, indexed("x_minus_", sys.n));
  append(header, indexed("v_", sys.q));
  append(header, indexed("x_plus_", sys.n));
  header.push_back("T_I_k");
  CsvWriter iw(ctx.out_dir / "impacts.csv", header);
  for (std::size_t k = 0; k < traj.impacts.size(); ++k) {
    const ImpactRecord& imp = traj.impacts[k];
    double ti = std::numeric_limits<double>::quiet_NaN();
    if (k + 1 < traj.impacts.size()) {
      ti = traj.impacts[k + 1].t - imp.t;
    } else if (traj.termination == Termination::HorizonReached) {
      try {
        const ImpactSearch next = flow_to_impact(sys, imp.x_plus, c.u, imp.t, imp.t + solver.events.t_cap, solver);
        ti = next.event ? next.event->t_hit - imp.t : std::numeric_limits<double>::infinity();
      } catch (const Error&) {
        ti = std::numeric_limits<double>::quiet_NaN();
      }
    }
    Row r;
    r.integer(static_cast<long long>(imp.k)).num(imp.t).vec(imp.x_minus).vec(imp.v).vec(imp.x_plus).num(ti);
    iw.write(r.cells);
  }

  int code = kOk;
  switch (traj.termination) {
    case Termination::HorizonReached: code = kOk; break;
    case Termination::ZenoGuard:
    case Termination::BeatingGuard: code = kGuard; break;
    case Termination::Escape:
    case Termination::Error: code = kSolver; break;
  }
  Json meta = Json::object();
  meta["command"] = "simulate";
  meta["model"] = c.model;
  meta["params"] = params_json(c);
  meta["seed"] = c.seed;
  meta["termination"] = std::string(to_string(traj.termination));
  meta["message"] = traj.message;
  meta["impacts"] = traj.impacts.size();
  meta["segments"] = traj.segments.size();
  meta["t_final"] = c.simulate.t_final;
  meta["x0"] = vector_to_json(x0);
  meta["exit_code"] = code;
  meta["config"] = to_json(c);
  meta["generated_at"] = utc_timestamp();
  write_json(ctx.out_dir / "meta.json", meta);
  ctx.out << "termination=" << to_string(traj.termination) << " impacts=" << traj.impacts.size() << '\n';
  if (code != kOk) ctx.err << "simulation ended: " << to_string(traj.termination) << ": " << traj.message << '\n';
  return code;
}

int cmd_orbit(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const StabilityReport rep = solve_orbit(ctx);
  const PeriodicOrbit orbit = build_orbit(ctx.sys, rep, orbit_config(c));

  Json j = Json::object();
  j["model"] = c.model;
  j["params"] = params_json(c);
  j["report"] = report_to_json(rep);
  j["orbit"] = {{"diameter", orbit.diameter()},
                {"ds_max", orbit.ds_max()},
                {"max_spacing", orbit.max_spacing()},
                {"samples", orbit.samples().size()},
                {"closure_error", (orbit.flow().x1() - rep.x_star).norm()}};
  if (const auto o = oracle(c.model, c.params)) {
    Json oj = Json::object();
    if (o->x_star) oj["x_star"] = vector_to_json(*o->x_star);
    if (o->T_star) oj["T_star"] = *o->T_star;
    if (o->eigenvalue) oj["eigenvalue"] = *o->eigenvalue;
    oj["note"] = o->note;
    j["oracle"] = oj;
  }
  write_json(ctx.out_dir / "orbit.json", j);

  std::vector<std::string> header{"tau", "tau_backward"};
  append(header, indexed("x_", ctx.sys.n));
  CsvWriter w(ctx.out_dir / "orbit_samples.csv", header);
  for (std::size_t i = 0; i < orbit.samples().size(); ++i) {
    Row r;
    r.num(orbit.taus()[i]).num(orbit.backward_tau(orbit.taus()[i])).vec(orbit.samples()[i]);
    w.write(r.cells);
  }
  ctx.out << to_string(rep.verdict) << ": spectral_radius=" << format_number(rep.spectral_radius) << '\n';
  return kOk;
}

int cmd_certify(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const StabilityReport rep = solve_orbit(ctx);
  const PeriodicOrbit orbit = build_orbit(ctx.sys, rep, orbit_config(c));
  const std::vector<double> radii =
      c.certify.radii ? *c.certify.radii
                      : default_prop1_radii(orbit, c.certify.decades, c.certify.per_decade, c.certify.far_field);
  const Prop1Report p = certify_prop1(orbit, ctx.sys, c.certify.samples, radii, c.seed, rep.chart_index, ctx.threads);

  CsvWriter w(ctx.out_dir / "prop1_samples.csv", {"sample", "radius", "dist_to_xstar", "dist_to_orbit", "ratio"});
  for (std::size_t s = 0; s < p.records.size(); ++s) {
    const auto& r = p.records[s];
    const double ratio = r.dist_to_xstar >= 1e-12 ? r.dist_to_orbit / r.dist_to_xstar : std::numeric_limits<double>::quiet_NaN();
    Row row;
    row.integer(static_cast<long long>(s)).num(r.radius).num(r.dist_to_xstar).num(r.dist_to_orbit).num(ratio);
    w.write(row.cells);
  }

  const bool ok = p.violations == 0 && p.lambda_hat > 0.0;
  Json j = Json::object();
  j["model"] = c.model;
  j["params"] = params_json(c);
  j["seed"] = c.seed;
  j["lambda_hat"] = p.lambda_hat;
  j["violations"] = p.violations;
  j["upper_bound_margin"] = p.upper_bound_margin;
  j["samples"] = p.samples;
  j["skipped_degenerate"] = p.skipped_degenerate;
  j["skipped_embedding"] = p.skipped_embedding;
  Json radii_json = Json::array();
  for (double r : p.radii) radii_json.push_back(r);
  j["radii"] = radii_json;
  j["orbit_diameter"] = orbit.diameter();
  j["passed"] = ok;
  write_json(ctx.out_dir / "prop1.json", j);
  ctx.out << "lambda_hat=" << format_number(p.lambda_hat) << " violations=" << p.violations << '\n';
  if (!ok) {
    ctx.err << (p.violations ? "upper-bound violations: " + std::to_string(p.violations) : std::string("lambda_hat is not positive"))
            << '\n';
    return kCertification;
  }
  return kOk;
}

int cmd_sweep(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const ModelCatalogEntry& entry = catalog_entry(c.model);
  if (entry.negative_control) {
    throw Error(ErrorKind::InvalidConfig, "model '" + c.model + "' is a negative control without a periodic orbit");
  }
  const StabilityReport rep = solve_orbit(ctx);
  const PeriodicOrbit orbit = build_orbit(ctx.sys, rep, orbit_config(c));

  SweepConfig sw;
  sw.offsets = c.sweep.offsets;
  sw.u_amps = c.sweep.u_amps;
  sw.v_amps = c.sweep.v_amps;
  if (c.sweep.relative) {
    for (double& a : sw.u_amps) a *= entry.u_scale;
    for (double& a : sw.v_amps) a *= entry.v_scale;
  }
  sw.paired = c.sweep.paired;
  sw.trials = c.sweep.trials;
  sw.horizon_periods = c.sweep.horizon_periods;
  sw.cutoff = c.sweep.cutoff;
  sw.window_samples = c.sweep.window_samples;
  sw.seed = c.seed;
  sw.solver = c.solver();
  sw.guards = c.guards;
  sw.u_template = c.u_given ? c.u : ContinuousSignal::constant(Input::Ones(ctx.sys.p));
  sw.v_template = c.v_given ? c.v : DiscreteSequence::constant(Input::Ones(ctx.sys.q));
  const IssSweepReport report = run_sweep(ctx.sys, orbit, rep, sw, ctx.threads);
  const EquivalenceVerdict verdict = check_equivalence(report, c.sweep.F_max, c.sweep.zero_floor);

  CsvWriter w(ctx.out_dir / "cells.csv",
              {"cell", "offset", "u_amp", "v_amp", "trials", "seed", "horizon", "ultimate_orbital",
               "ultimate_discrete", "peak", "cross_ratio", "N_orbital", "omega", "N_discrete", "rho", "zeno",
               "beating", "escape", "error", "dwell_min", "dwell_max"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const CellResult& cell : report.cells) {
    Row r;
    r.integer(static_cast<long long>(cell.index)).num(cell.offset).num(cell.u_amp).num(cell.v_amp);
    r.integer(static_cast<long long>(cell.trials));
    r.cells.push_back(std::to_string(cell.seed));
    r.num(cell.horizon).num(cell.ultimate_orbital).num(cell.ultimate_discrete).num(cell.peak).num(cell.cross_ratio);
    r.num(cell.fit ? cell.fit->orbital.N : nan).num(cell.fit ? cell.fit->orbital.omega : nan);
    r.num(cell.fit ? cell.fit->discrete.N : nan).num(cell.fit ? cell.fit->rho : nan);
    r.integer(static_cast<long long>(cell.guards.zeno)).integer(static_cast<long long>(cell.guards.beating));
    r.integer(static_cast<long long>(cell.guards.escape)).integer(static_cast<long long>(cell.guards.error));
    r.num(cell.dwell_min).num(cell.dwell_max);
    w.write(r.cells);
  }

  Json j = Json::object();
  j["model"] = c.model;
  j["params"] = params_json(c);
  j["seed"] = c.seed;
  j["trials"] = sw.trials;
  j["horizon_periods"] = sw.horizon_periods;
  j["cutoff"] = sw.cutoff;
  j["T_star"] = report.T_star;
  j["spectral_radius"] = rep.spectral_radius;
  j["verdict"] = std::string(to_string(rep.verdict));
  j["T_lower"] = number_or_null(report.T_lower);
  j["T_upper"] = number_or_null(report.T_upper);
  std::size_t guard_total = 0;
  for (const auto& cell : report.cells) guard_total += cell.guards.total();
  j["guard_terminations"] = guard_total;
  j["equivalence"] = {{"monotone", verdict.monotone},
                      {"monotone_checks", verdict.monotone_checks},
                      {"monotone_violations", verdict.monotone_violations},
                      {"factor_ok", verdict.factor_ok},
                      {"F", number_or_null(verdict.F)},
                      {"F_max", verdict.F_max},
                      {"zero_input_ok", verdict.zero_input_ok},
                      {"zero_input_max", number_or_null(verdict.zero_input_max)},
                      {"zero_floor", verdict.zero_floor},
                      {"passed", verdict.passed()}};

  // Linear gain through the origin along the continuous-input axis (first offset, zero v).
  std::vector<double> amps, orb, disc;
  for (const auto& cell : report.cells) {
    if (cell.offset == report.cells.front().offset && cell.v_amp == 0.0 && std::isfinite(cell.ultimate_discrete)) {
      amps.push_back(cell.u_amp);
      orb.push_back(cell.ultimate_orbital);
      disc.push_back(cell.ultimate_discrete);
    }
  }
  if (amps.size() >= 2) {
    const GainFit go = fit_gain(amps, orb), gd = fit_gain(amps, disc);
    j["u_gain"] = {{"orbital_c", go.c}, {"orbital_residual", go.residual}, {"discrete_c", gd.c}, {"discrete_residual", gd.residual}};
  }
  write_json(ctx.out_dir / "summary.json", j);
  ctx.out << "cells=" << report.cells.size() << " equivalence=" << (verdict.passed() ? "pass" : "fail")
          << " F=" << format_number(verdict.F) << '\n';
  return verdict.passed() ? kOk : kCertification;
}

int cmd_validate(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const HybridSystemDef& sys = ctx.sys;
  std::vector<State> probes;
  if (c.validate.probes) {
    for (const auto& p : *c.validate.probes) probes.push_back(std_to_state(p));
  } else {
    const State ref = reference_state(c);
    probes.push_back(ref);
    probes.push_back(sys.eval_delta(ref, sys.zero_v()));
    SplitMix64 rng(derive_seed(c.seed, 0x7A11D));
    for (std::size_t i = 0; i < c.validate.random_probes; ++i) {
      State x = ref;
      for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += c.validate.radius * rng.normal();
      probes.push_back(x);
    }
  }
  const ValidationReport vr = validate_system(sys, probes, c.events.event_tol);
  const RegistrationCheck reg = check_registration(c.model, c.params);
  const bool ok = vr.passed(c.validate.grad_tol);

  Json j = Json::object();
  j["model"] = c.model;
  j["params"] = params_json(c);
  j["probes"] = probes.size();
  j["all_finite"] = vr.all_finite;
  j["degenerate_gradient"] = vr.degenerate_gradient;
  j["max_grad_mismatch"] = vr.max_grad_mismatch;
  j["grad_tol"] = c.validate.grad_tol;
  j["passed"] = ok;
  j["registration"] = {{"has_fixed_point", reg.has_fixed_point},
                       {"reset_in_splus", reg.reset_in_splus},
                       {"transversal", reg.transversal},
                       {"h_after_reset", reg.h_after_reset},
                       {"lfh", reg.lfh},
                       {"passed", reg.passed()},
                       {"negative_control", catalog_entry(c.model).negative_control},
                       {"note", reg.note}};
  write_json(ctx.out_dir / "validation.json", j);
  ctx.out << "validation=" << (ok ? "pass" : "fail") << " registration=" << (reg.passed() ? "pass" : "fail") << '\n';
  return ok ? kOk : kCertification;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnknownModel:
    case ErrorKind::ParamOutOfRange:
    case ErrorKind::PreconditionViolated:
      return kUsage;
    case ErrorKind::UpperBoundViolation:
      return kCertification;
    default:
      return kSolver;
  }
}

}  // namespace

int run(const Options& opts, std::ostream& out, std::ostream& err) {
  static const char* const kCommands[] = {"simulate", "orbit", "certify-prop1", "iss-sweep", "validate"};
  bool known = false;
  for (const char* name : kCommands) known = known || opts.command == name;
  if (!known) {
    err << "error: unknown subcommand '" << opts.command << "'\n";
    return kUsage;
  }
  try {
    RunConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    fs::path out_dir = opts.out ? *opts.out : cfg.out ? fs::path(*cfg.out) : fs::path("out");
    if (!opts.out && cfg.out && out_dir.is_relative()) out_dir = cfg.base_dir / out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::InvalidConfig, "cannot create output directory '" + out_dir.string() + "'");
    Context ctx{cfg, model(cfg.model, cfg.params), out_dir, resolve_threads(opts.threads), out, err};
    if (opts.command == "simulate") return cmd_simulate(ctx);
    if (opts.command == "orbit") return cmd_orbit(ctx);
    if (opts.command == "certify-prop1") return cmd_certify(ctx);
    if (opts.command == "iss-sweep") return cmd_sweep(ctx);
    return cmd_validate(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kSolver;
  }
}

}  // namespace sie::cli
