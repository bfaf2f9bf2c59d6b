#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sie/cli.hpp"
#include "sie/config.hpp"
#include "sie/iss.hpp"
#include "sie/models.hpp"
#include "sie/orbit.hpp"

namespace py = pybind11;
using namespace sie;

namespace {

struct Model {
  std::string name;
  ParamMap params;
  HybridSystemDef sys;

  Model(const std::string& n, const ParamMap& given) : name(n), params(resolve_params(n, given)), sys(model(n, params)) {}
};

ContinuousSignal signal_or_zero(const std::optional<std::string>& spec, int dim) {
  return spec ? signal_from_json(Json::parse(*spec)) : ContinuousSignal::zero(dim);
}

DiscreteSequence sequence_or_zero(const std::optional<std::string>& spec, int dim) {
  return spec ? sequence_from_json(Json::parse(*spec)) : DiscreteSequence::zero(dim);
}

Eigen::MatrixXd stack(const std::vector<State>& rows, int n) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

py::dict oracle_dict(const OraclePack& o) {
  py::dict d;
  d["x_star"] = o.x_star ? py::cast(*o.x_star) : py::none();
  d["T_star"] = o.T_star ? py::cast(*o.T_star) : py::none();
  d["eigenvalue"] = o.eigenvalue ? py::cast(*o.eigenvalue) : py::none();
  d["forced_gain"] = o.forced_gain ? py::cast(*o.forced_gain) : py::none();
  d["T_band_rel"] = o.T_band_rel;
  d["note"] = o.note;
  return d;
}

py::dict simulate_py(const Model& m, const State& x0, double t_final, const std::optional<std::string>& u,
                     const std::optional<std::string>& v, std::optional<double> sample_dt) {
  const ContinuousSignal us = signal_or_zero(u, m.sys.p);
  const DiscreteSequence vs = sequence_or_zero(v, m.sys.q);
  HybridTrajectory traj;
  {
    py::gil_scoped_release release;
    traj = simulate(m.sys, x0, us, vs, t_final, GuardConfig{}, SolverConfig{});
  }
  py::list impacts;
  for (const auto& imp : traj.impacts) {
    py::dict d;
    d["k"] = imp.k;
    d["t"] = imp.t;
    d["x_minus"] = imp.x_minus;
    d["v"] = imp.v;
    d["x_plus"] = imp.x_plus;
    impacts.append(d);
  }
  const double t_end = traj.segments.empty() ? 0.0 : traj.segments.back().t1();
  const double dt = sample_dt.value_or(t_final / 1000.0);
  std::vector<double> ts;
  std::vector<State> xs;
  for (double t = 0.0; t <= t_end + 1e-12 * std::max(1.0, t_end); t = ts.size() * dt) {
    ts.push_back(std::min(t, t_end));
    xs.push_back(traj.eval(ts.back()));
  }
  py::dict out;
  out["termination"] = std::string(to_string(traj.termination));
  out["message"] = traj.message;
  out["impacts"] = impacts;
  out["t"] = ts;
  out["x"] = stack(xs, m.sys.n);
  return out;
}

py::dict prop1_dict(const Prop1Report& r) {
  py::dict d;
  d["lambda_hat"] = r.lambda_hat;
  d["violations"] = r.violations;
  d["upper_bound_margin"] = r.upper_bound_margin;
  d["samples"] = r.samples;
  d["skipped_degenerate"] = r.skipped_degenerate;
  d["skipped_embedding"] = r.skipped_embedding;
  d["radii"] = r.radii;
  std::vector<double> radius, dx, dorb;
  for (const auto& s : r.records) {
    radius.push_back(s.radius);
    dx.push_back(s.dist_to_xstar);
    dorb.push_back(s.dist_to_orbit);
  }
  d["radius"] = radius;
  d["dist_to_xstar"] = dx;
  d["dist_to_orbit"] = dorb;
  return d;
}

py::dict sweep_py(const Model& m, const PeriodicOrbit& orbit, const StabilityReport& report, std::vector<double> offsets,
                  std::vector<double> u_amps, std::vector<double> v_amps, bool paired, std::size_t trials,
                  double horizon_periods, double cutoff, std::uint64_t seed, const std::optional<std::string>& u,
                  const std::optional<std::string>& v, int threads, double F_max, double zero_floor) {
  SweepConfig sw;
  sw.offsets = std::move(offsets);
  sw.u_amps = std::move(u_amps);
  sw.v_amps = std::move(v_amps);
  sw.paired = paired;
  sw.trials = trials;
  sw.horizon_periods = horizon_periods;
  sw.cutoff = cutoff;
  sw.seed = seed;
  if (u) sw.u_template = signal_from_json(Json::parse(*u));
  if (v) sw.v_template = sequence_from_json(Json::parse(*v));
  IssSweepReport rep;
  {
    py::gil_scoped_release release;
    rep = run_sweep(m.sys, orbit, report, sw, threads);
  }
  py::list cells;
  for (const auto& c : rep.cells) {
    py::dict d;
    d["offset"] = c.offset;
    d["u_amp"] = c.u_amp;
    d["v_amp"] = c.v_amp;
    d["trials"] = c.trials;
    d["ultimate_orbital"] = c.ultimate_orbital;
    d["ultimate_discrete"] = c.ultimate_discrete;
    d["peak"] = c.peak;
    d["trial_orbital"] = c.trial_orbital;
    d["trial_discrete"] = c.trial_discrete;
    d["guard_terminations"] = c.guards.total();
    d["dwell_min"] = c.dwell_min;
    d["dwell_max"] = c.dwell_max;
    if (c.fit) {
      py::dict f;
      f["rho"] = c.fit->rho;
      f["orbital_omega"] = c.fit->orbital.omega;
      f["orbital_N"] = c.fit->orbital.N;
      f["discrete_omega"] = c.fit->discrete.omega;
      f["discrete_N"] = c.fit->discrete.N;
      d["fit"] = f;
    } else {
      d["fit"] = py::none();
    }
    cells.append(d);
  }
  const EquivalenceVerdict ev = check_equivalence(rep, F_max, zero_floor);
  py::dict eq;
  eq["passed"] = ev.passed();
  eq["monotone"] = ev.monotone;
  eq["factor_ok"] = ev.factor_ok;
  eq["F"] = ev.F;
  eq["zero_input_ok"] = ev.zero_input_ok;
  eq["zero_input_max"] = ev.zero_input_max;
  py::dict out;
  out["cells"] = cells;
  out["equivalence"] = eq;
  out["T_star"] = rep.T_star;
  out["T_lower"] = rep.T_lower;
  out["T_upper"] = rep.T_upper;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Forced systems with impulse effects: simulation, periodic orbits and ISS experiments";

  static py::exception<Error> sie_error(m, "SieError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = sie_error;
      py::object inst = exc(e.what());
      inst.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(exc.ptr(), inst.ptr());
    }
  });

  m.def("catalog", [] {
    py::list out;
    for (const auto& e : catalog()) {
      py::dict d;
      d["name"] = e.name;
      d["description"] = e.description;
      d["assumptions"] = e.assumptions;
      d["u_scale"] = e.u_scale;
      d["v_scale"] = e.v_scale;
      d["negative_control"] = e.negative_control;
      py::list params;
      for (const auto& p : e.params) {
        py::dict pd;
        pd["name"] = p.name;
        pd["default"] = p.default_value;
        pd["min"] = p.min;
        pd["max"] = p.max;
        pd["doc"] = p.doc;
        params.append(pd);
      }
      d["params"] = params;
      out.append(d);
    }
    return out;
  });

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const ParamMap&>(), py::arg("name"), py::arg("params") = ParamMap{})
      .def_readonly("name", &Model::name)
      .def_readonly("params", &Model::params)
      .def_property_readonly("n", [](const Model& s) { return s.sys.n; })
      .def_property_readonly("p", [](const Model& s) { return s.sys.p; })
      .def_property_readonly("q", [](const Model& s) { return s.sys.q; })
      .def("f", [](const Model& s, const State& x, const Input& u) { return s.sys.eval_f(x, u); })
      .def("delta", [](const Model& s, const State& x, const Input& v) { return s.sys.eval_delta(x, v); })
      .def("h", [](const Model& s, const State& x) { return s.sys.eval_h(x); })
      .def("grad_h", [](const Model& s, const State& x) { return s.sys.eval_grad_h(x); })
      .def("oracle", [](const Model& s) -> py::object {
        const auto o = oracle(s.name, s.params);
        return o ? py::object(oracle_dict(*o)) : py::object(py::none());
      })
      .def("default_guess", [](const Model& s) { return default_guess(s.name, s.params); })
      .def("__repr__", [](const Model& s) { return "Model('" + s.name + "')"; });

  py::class_<StabilityReport>(m, "StabilityReport")
      .def_readonly("x_star", &StabilityReport::x_star)
      .def_readonly("T_star", &StabilityReport::T_star)
      .def_readonly("chart_index", &StabilityReport::chart_index)
      .def_readonly("converged", &StabilityReport::converged)
      .def_readonly("newton_residuals", &StabilityReport::newton_residuals)
      .def_readonly("jacobian", &StabilityReport::jacobian)
      .def_readonly("eigenvalues", &StabilityReport::eigenvalues)
      .def_readonly("spectral_radius", &StabilityReport::spectral_radius)
      .def_readonly("richardson_diff", &StabilityReport::richardson_diff)
      .def_readonly("richardson_bound", &StabilityReport::richardson_bound)
      .def_property_readonly("richardson_consistent", &StabilityReport::richardson_consistent)
      .def_property_readonly("verdict", [](const StabilityReport& r) { return std::string(to_string(r.verdict)); })
      .def("to_json", [](const StabilityReport& r) { return report_to_json(r).dump(); });

  m.def(
      "find_fixed_point",
      [](const Model& s, std::optional<State> guess, int max_iter, double newton_tol) {
        FixedPointConfig cfg;
        cfg.max_iter = max_iter;
        cfg.newton_tol = newton_tol;
        py::gil_scoped_release release;
        return find_fixed_point(s.sys, guess ? *guess : default_guess(s.name, s.params), cfg);
      },
      py::arg("model"), py::arg("guess") = py::none(), py::arg("max_iter") = 50, py::arg("newton_tol") = 1e-10);
  m.def(
      "linearize",
      [](const Model& s, const StabilityReport& r) {
        py::gil_scoped_release release;
        return linearize(s.sys, r);
      },
      py::arg("model"), py::arg("report"));

  py::class_<PeriodicOrbit>(m, "Orbit")
      .def_property_readonly("x_star", &PeriodicOrbit::x_star)
      .def_property_readonly("T_star", &PeriodicOrbit::T_star)
      .def_property_readonly("diameter", &PeriodicOrbit::diameter)
      .def_property_readonly("taus", &PeriodicOrbit::taus)
      .def_property_readonly("samples", [](const PeriodicOrbit& o) { return stack(o.samples(), static_cast<int>(o.x_star().size())); })
      .def("eval", &PeriodicOrbit::eval, py::arg("tau"))
      .def("distance", [](const PeriodicOrbit& o, const State& x) { return dist_to_orbit(o, x).d; }, py::arg("x"))
      .def(
          "closest", [](const PeriodicOrbit& o, const State& x) { return dist_to_orbit(o, x).tau_set; }, py::arg("x"));

  m.def(
      "build_orbit",
      [](const Model& s, const StabilityReport& r, double ds_rel) {
        OrbitConfig cfg;
        cfg.ds_rel = ds_rel;
        py::gil_scoped_release release;
        return build_orbit(s.sys, r, cfg);
      },
      py::arg("model"), py::arg("report"), py::arg("ds_rel") = 1e-3);

  m.def("_simulate", &simulate_py, py::arg("model"), py::arg("x0"), py::arg("t_final"), py::arg("u") = py::none(),
        py::arg("v") = py::none(), py::arg("sample_dt") = py::none());

  m.def(
      "certify_prop1",
      [](const PeriodicOrbit& o, const Model& s, std::size_t samples, std::uint64_t seed,
         std::optional<std::vector<double>> radii, int threads) {
        const std::vector<double> r = radii ? *radii : default_prop1_radii(o);
        Prop1Report rep;
        {
          py::gil_scoped_release release;
          rep = certify_prop1(o, s.sys, samples, r, seed, std::nullopt, threads);
        }
        return prop1_dict(rep);
      },
      py::arg("orbit"), py::arg("model"), py::arg("samples") = 10000, py::arg("seed") = 0,
      py::arg("radii") = py::none(), py::arg("threads") = 1);

  m.def("_run_sweep", &sweep_py, py::arg("model"), py::arg("orbit"), py::arg("report"), py::arg("offsets"),
        py::arg("u_amps"), py::arg("v_amps"), py::arg("paired"), py::arg("trials"), py::arg("horizon_periods"),
        py::arg("cutoff"), py::arg("seed"), py::arg("u"), py::arg("v"), py::arg("threads"), py::arg("F_max"),
        py::arg("zero_floor"));

  m.def(
      "run_cli",
      [](const std::string& command, const std::string& config, std::optional<std::string> out,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        cli::Options o;
        o.command = command;
        o.config = config;
        if (out) o.out = *out;
        o.seed = seed;
        o.threads = threads;
        std::ostringstream so, se;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(o, so, se);
        }
        return py::make_tuple(code, so.str(), se.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      py::arg("threads") = py::none());

  m.def("format_number", &cli::format_number);
}
