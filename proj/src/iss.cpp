#include "sie/iss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sie/parallel.hpp"
#include "sie/rng.hpp"

namespace sie {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_list(const std::vector<double>& v, const char* name) {
  if (v.empty()) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || !std::isfinite(v[i])) {
      throw Error(ErrorKind::InvalidConfig, std::string(name) + " entries must be finite and >= 0");
    }
    if (i > 0 && v[i] < v[i - 1]) {
      throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be sorted ascending");
    }
  }
}

ContinuousSignal scale_u(const ContinuousSignal& tmpl, double amp) {
  if (amp == 0.0) return ContinuousSignal::zero(tmpl.dim());
  const double s = tmpl.sup_norm();
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidConfig, "continuous input template has zero norm");
  return tmpl.scaled(amp / s);
}

DiscreteSequence scale_v(const DiscreteSequence& tmpl, double amp, std::uint64_t seed) {
  if (amp == 0.0) return DiscreteSequence::zero(tmpl.dim());
  const double s = tmpl.sup_norm();
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidConfig, "discrete input template has zero norm");
  return tmpl.reseeded(seed).scaled(amp / s);
}

double finite_median(const std::vector<double>& v) {
  std::vector<double> f;
  for (double x : v) {
    if (std::isfinite(x)) f.push_back(x);
  }
  return f.empty() ? kInf : median(std::move(f));
}

struct CellSpec {
  double offset, u_amp, v_amp;
};

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return kNaN;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void SweepConfig::validate() const {
  check_list(offsets, "offsets");
  check_list(u_amps, "u_amps");
  check_list(v_amps, "v_amps");
  if (paired && u_amps.size() != v_amps.size()) {
    throw Error(ErrorKind::InvalidConfig, "paired sweeps need equally long u_amps and v_amps");
  }
  if (trials < 1) throw Error(ErrorKind::InvalidConfig, "trials must be >= 1");
  if (!(horizon_periods > 0.0) || !std::isfinite(horizon_periods)) {
    throw Error(ErrorKind::InvalidConfig, "horizon_periods must be positive");
  }
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw Error(ErrorKind::InvalidConfig, "cutoff must lie in (0, 1)");
  if (window_samples < 1) throw Error(ErrorKind::InvalidConfig, "window_samples must be >= 1");
  solver.integ.validate();
  solver.events.validate();
}

TrialTrace run_trial(const HybridSystemDef& sys, const PeriodicOrbit& orbit,
                     const StabilityReport& report, const State& x0, const ContinuousSignal& u,
                     const DiscreteSequence& v, double t_final, const SolverConfig& solver,
                     const GuardConfig& guards, int window_samples) {
  TrialTrace tr;
  tr.initial_orbital = dist_to_orbit(orbit, x0).d;
  tr.initial_discrete = (x0 - report.x_star).norm();
  const HybridTrajectory traj = simulate(sys, x0, u, v, t_final, guards, solver);
  tr.termination = traj.termination;
  tr.message = traj.message;
  for (const auto& imp : traj.impacts) {
    tr.impact_t.push_back(imp.t);
    tr.discrete.push_back((imp.x_minus - report.x_star).norm());
  }
  for (const FlowSegment& seg : traj.segments) {
    const double a = seg.t0(), b = std::min(seg.t1(), t_final);
    double sup = 0.0;
    for (int i = 0; i <= window_samples; ++i) {
      const double t = i == window_samples ? b : a + (b - a) * i / window_samples;
      sup = std::max(sup, dist_to_orbit(orbit, seg.eval(t)).d);
    }
    tr.window_t.push_back(a);
    tr.window_sup.push_back(sup);
  }
  return tr;
}

IssSweepReport run_sweep(const HybridSystemDef& sys, const PeriodicOrbit& orbit,
                         const StabilityReport& report, const SweepConfig& sweep, int threads) {
  sweep.validate();
  if (!report.converged) throw Error(ErrorKind::PreconditionViolated, "sweep needs a converged report");
  if (report.verdict == Verdict::Unstable) {
    throw Error(ErrorKind::PreconditionViolated, "sweep needs a fixed point that is not unstable");
  }
  if (sweep.u_template.dim() != sys.p || sweep.v_template.dim() != sys.q) {
    throw Error(ErrorKind::InvalidConfig, "input template dimensions do not match the model");
  }

  std::vector<CellSpec> specs;
  for (double off : sweep.offsets) {
    if (sweep.paired) {
      for (std::size_t i = 0; i < sweep.u_amps.size(); ++i) specs.push_back({off, sweep.u_amps[i], sweep.v_amps[i]});
    } else {
      for (double ua : sweep.u_amps) {
        for (double va : sweep.v_amps) specs.push_back({off, ua, va});
      }
    }
  }

  const double t_final = sweep.horizon_periods * report.T_star;
  const SurfaceChart chart(sys, report.x_star, report.chart_index);
  const Eigen::VectorXd z_star = chart.project(report.x_star);
  GuardConfig guards = sweep.guards;
  if (!guards.period_hint) guards.period_hint = report.T_star;

  const std::size_t n_trials = sweep.trials;
  std::vector<TrialTrace> traces(specs.size() * n_trials);
  parallel_for(traces.size(), threads, [&](std::size_t job) {
    const std::size_t c = job / n_trials, k = job % n_trials;
    const CellSpec& cs = specs[c];
    const std::uint64_t trial_seed = derive_seed(sweep.seed, c, k);
    SplitMix64 rng(trial_seed);
    Eigen::VectorXd dir(chart.dim());
    if (chart.dim() == 1) {
      dir[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else if (chart.dim() > 1) {
      do {
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
      } while (dir.norm() == 0.0);
      dir.normalize();
    }
    const State x0 = chart.embed(z_star + cs.offset * dir);
    const ContinuousSignal u = scale_u(sweep.u_template, cs.u_amp);
    const DiscreteSequence v = scale_v(sweep.v_template, cs.v_amp, rng.next());
    traces[job] = run_trial(sys, orbit, report, x0, u, v, t_final, sweep.solver, guards, sweep.window_samples);
  });

  IssSweepReport rep;
  rep.config = sweep;
  rep.T_star = report.T_star;
  double dwell_lo = kInf, dwell_hi = 0.0;
  const double t_cut = sweep.cutoff * t_final;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    CellResult cell;
    cell.index = c;
    cell.offset = specs[c].offset;
    cell.u_amp = specs[c].u_amp;
    cell.v_amp = specs[c].v_amp;
    cell.trials = n_trials;
    cell.seed = sweep.seed;
    cell.horizon = t_final;
    cell.dwell_min = kInf;
    cell.dwell_max = 0.0;
    std::vector<TrialTrace> cell_traces;
    for (std::size_t k = 0; k < n_trials; ++k) {
      TrialTrace& tr = traces[c * n_trials + k];
      switch (tr.termination) {
        case Termination::HorizonReached: break;
        case Termination::ZenoGuard: ++cell.guards.zeno; break;
        case Termination::BeatingGuard: ++cell.guards.beating; break;
        case Termination::Escape: ++cell.guards.escape; break;
        case Termination::Error: ++cell.guards.error; break;
      }
      double orb = -kInf, disc = -kInf, peak = tr.initial_orbital;
      for (std::size_t i = 0; i < tr.window_t.size(); ++i) {
        peak = std::max(peak, tr.window_sup[i]);
        if (tr.window_t[i] >= t_cut) orb = std::max(orb, tr.window_sup[i]);
      }
      for (std::size_t i = 0; i < tr.impact_t.size(); ++i) {
        if (tr.impact_t[i] >= t_cut) disc = std::max(disc, tr.discrete[i]);
        if (i > 0) {
          const double dwell = tr.impact_t[i] - tr.impact_t[i - 1];
          cell.dwell_min = std::min(cell.dwell_min, dwell);
          cell.dwell_max = std::max(cell.dwell_max, dwell);
        }
      }
      cell.trial_orbital.push_back(orb == -kInf ? kInf : orb);
      cell.trial_discrete.push_back(disc == -kInf ? kInf : disc);
      cell.peak = std::max(cell.peak, peak);
      cell_traces.push_back(std::move(tr));
    }
    cell.ultimate_orbital = finite_median(cell.trial_orbital);
    cell.ultimate_discrete = finite_median(cell.trial_discrete);
    cell.cross_ratio = cell.ultimate_discrete > 0.0 ? cell.ultimate_orbital / cell.ultimate_discrete : kNaN;
    if (cell.dwell_max > 0.0) {
      dwell_lo = std::min(dwell_lo, cell.dwell_min);
      dwell_hi = std::max(dwell_hi, cell.dwell_max);
    } else {
      cell.dwell_min = cell.dwell_max = kNaN;
    }
    const bool zero_input = cell.u_amp == 0.0 && cell.v_amp == 0.0;
    if (zero_input && cell.offset > 0.0) {
      try {
        cell.fit = fit_decay(cell_traces);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::FitDegenerate) throw;
      }
    }
    if (zero_input || sweep.keep_traces) cell.traces = std::move(cell_traces);
    rep.cells.push_back(std::move(cell));
  }
  rep.T_lower = dwell_lo < kInf ? 0.8 * dwell_lo : kNaN;
  rep.T_upper = dwell_hi > 0.0 ? 1.2 * dwell_hi : kNaN;
  return rep;
}

namespace {

DecayFit line_fit(const std::vector<std::pair<double, double>>& pts) {
  const double n = static_cast<double>(pts.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::FitDegenerate, "decay fit has no spread in the abscissa");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (const auto& [x, y] : pts) {
    const double r = y - (intercept + slope * x);
    ss += r * r;
  }
  DecayFit f;
  f.N = std::exp(intercept);
  f.omega = -slope;
  f.residual = std::sqrt(ss / n);
  f.points = pts.size();
  return f;
}

}  // namespace

DecayFitResult fit_decay(const std::vector<TrialTrace>& runs, double floor, std::size_t min_runs,
                         std::size_t min_points) {
  if (runs.size() < min_runs) {
    throw Error(ErrorKind::FitDegenerate,
                "decay fit needs at least " + std::to_string(min_runs) + " runs, got " + std::to_string(runs.size()));
  }
  std::vector<std::pair<double, double>> orb, disc;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const TrialTrace& tr = runs[r];
    if (tr.window_sup.empty() || tr.discrete.empty()) {
      throw Error(ErrorKind::FitDegenerate, "run without samples", kNaN, static_cast<std::ptrdiff_t>(r));
    }
    const double o0 = tr.window_sup.front();
    const double d0 = tr.discrete.front();
    if (!(o0 > floor) || !(d0 > floor)) {
      throw Error(ErrorKind::FitDegenerate, "initial deviation at the numerical floor", kNaN,
                  static_cast<std::ptrdiff_t>(r));
    }
    std::size_t n_orb = 0, n_disc = 0;
    for (std::size_t i = 0; i < tr.window_sup.size() && tr.window_sup[i] > floor; ++i, ++n_orb) {
      orb.emplace_back(tr.window_t[i] - tr.window_t.front(), std::log(tr.window_sup[i] / o0));
    }
    for (std::size_t i = 0; i < tr.discrete.size() && tr.discrete[i] > floor; ++i, ++n_disc) {
      disc.emplace_back(static_cast<double>(i), std::log(tr.discrete[i] / d0));
    }
    if (n_orb < min_points || n_disc < min_points) {
      throw Error(ErrorKind::FitDegenerate,
                  "deviation reached the floor after " + std::to_string(std::min(n_orb, n_disc)) +
                      " points; rerun with a larger offset",
                  kNaN, static_cast<std::ptrdiff_t>(r));
    }
  }
  DecayFitResult res;
  res.orbital = line_fit(orb);
  res.discrete = line_fit(disc);
  res.rho = std::exp(-res.discrete.omega);
  return res;
}

GainFit fit_gain(const std::vector<double>& amps, const std::vector<double>& bounds) {
  if (amps.size() != bounds.size() || amps.empty()) {
    throw Error(ErrorKind::PreconditionViolated, "gain fit needs matching, non-empty series");
  }
  double saa = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    saa += amps[i] * amps[i];
    sab += amps[i] * bounds[i];
  }
  GainFit g;
  g.c = saa > 0.0 ? sab / saa : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double r = bounds[i] - g.c * amps[i];
    ss += r * r;
  }
  g.residual = std::sqrt(ss / static_cast<double>(amps.size()));
  return g;
}

namespace {

// True when the bootstrap 95% interval of median(hi) - median(lo) lies entirely below zero.
bool clearly_decreasing(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t n_boot,
                        std::uint64_t seed) {
  std::vector<double> a, b;
  for (double x : lo) {
    if (std::isfinite(x)) a.push_back(x);
  }
  for (double x : hi) {
    if (std::isfinite(x)) b.push_back(x);
  }
  if (a.empty() || b.empty()) return false;
  const double tie = 1e-12 * std::max({1e-300, std::abs(median(a)), std::abs(median(b))});
  SplitMix64 rng(seed);
  std::vector<double> diffs(n_boot);
  std::vector<double> ra(a.size()), rb(b.size());
  for (std::size_t s = 0; s < n_boot; ++s) {
    for (auto& x : ra) x = a[static_cast<std::size_t>(rng.uniform() * static_cast<double>(a.size()))];
    for (auto& x : rb) x = b[static_cast<std::size_t>(rng.uniform() * static_cast<double>(b.size()))];
    diffs[s] = median(rb) - median(ra);
  }
  std::sort(diffs.begin(), diffs.end());
  const double upper = diffs[std::min(n_boot - 1, static_cast<std::size_t>(0.975 * static_cast<double>(n_boot)))];
  return upper < -tie;
}

}  // namespace

EquivalenceVerdict check_equivalence(const IssSweepReport& rep, double F_max, double zero_floor,
                                     std::size_t bootstrap) {
  EquivalenceVerdict v;
  v.F_max = F_max;
  v.zero_floor = zero_floor;
  const auto& cells = rep.cells;

  std::uint64_t pair_id = 0;
  auto compare = [&](const CellResult& lo, const CellResult& hi) {
    for (int fam = 0; fam < 2; ++fam) {
      const auto& a = fam == 0 ? lo.trial_orbital : lo.trial_discrete;
      const auto& b = fam == 0 ? hi.trial_orbital : hi.trial_discrete;
      ++v.monotone_checks;
      if (clearly_decreasing(a, b, std::max<std::size_t>(bootstrap, 1), derive_seed(rep.config.seed, 0xB007, pair_id++))) {
        ++v.monotone_violations;
      }
    }
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const CellResult& a = cells[i];
      const CellResult& b = cells[j];
      if (a.offset != b.offset) continue;
      if (rep.config.paired) {
        if (j == i + 1) compare(a, b);
        continue;
      }
      // Next level along exactly one amplitude axis.
      const bool u_step = a.v_amp == b.v_amp && b.u_amp > a.u_amp;
      const bool v_step = a.u_amp == b.u_amp && b.v_amp > a.v_amp;
      if (!u_step && !v_step) continue;
      bool adjacent = true;
      for (const CellResult& c : cells) {
        if (c.offset != a.offset) continue;
        if (u_step && c.v_amp == a.v_amp && c.u_amp > a.u_amp && c.u_amp < b.u_amp) adjacent = false;
        if (v_step && c.u_amp == a.u_amp && c.v_amp > a.v_amp && c.v_amp < b.v_amp) adjacent = false;
      }
      if (adjacent) compare(a, b);
    }
  }
  v.monotone = v.monotone_violations == 0;

  v.F = 1.0;
  for (const CellResult& c : cells) {
    const double o = c.ultimate_orbital, d = c.ultimate_discrete;
    if (c.u_amp == 0.0 && c.v_amp == 0.0) {
      v.zero_input_max = std::max({v.zero_input_max, o, d});
      continue;
    }
    if (o <= zero_floor && d <= zero_floor) continue;
    const double ratio = (o > 0.0 && d > 0.0) ? std::max(o / d, d / o) : kInf;
    v.F = std::max(v.F, ratio);
  }
  v.factor_ok = v.F <= F_max;
  v.zero_input_ok = v.zero_input_max <= zero_floor;
  return v;
}

}  // namespace sie
