#include "sie/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sie/parallel.hpp"
#include "sie/rng.hpp"

namespace sie {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void refine_chord(const DenseStep& step, double ta, const State& ya, double tb, const State& yb,
                  double ds, int depth, std::vector<double>& ts, std::vector<State>& ys) {
  if (depth < 48 && (yb - ya).norm() > ds) {
    const double tm = 0.5 * (ta + tb);
    const State ym = step.eval(tm);
    refine_chord(step, ta, ya, tm, ym, ds, depth + 1, ts, ys);
    refine_chord(step, tm, ym, tb, yb, ds, depth + 1, ts, ys);
    return;
  }
  ts.push_back(tb);
  ys.push_back(yb);
}

double approximate_diameter(const FlowSegment& seg) {
  std::vector<State> pts;
  pts.push_back(seg.x0());
  for (const DenseStep& s : seg.steps()) {
    pts.push_back(s.eval(s.t0 + 0.5 * s.h));
    pts.push_back(s.y1);
  }
  const std::size_t stride = std::max<std::size_t>(1, pts.size() / 2000);
  double diam = 0.0;
  for (std::size_t i = 0; i < pts.size(); i += stride) {
    for (std::size_t j = i + stride; j < pts.size(); j += stride) {
      diam = std::max(diam, (pts[i] - pts[j]).norm());
    }
    diam = std::max(diam, (pts[i] - pts.back()).norm());
  }
  return diam;
}

struct Candidate {
  double tau;
  double d;
};

double phi(const PeriodicOrbit& orbit, const State& x, double tau) {
  const double t = orbit.flow().t0() + tau;
  return (orbit.flow().eval(t) - x).dot(orbit.flow().derivative(t));
}

Candidate minimize_interval(const PeriodicOrbit& orbit, const State& x, double a, double b) {
  auto dist = [&](double tau) { return (orbit.eval(tau) - x).norm(); };
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = a, hi = b;
  double c = hi - r * (hi - lo);
  double d = lo + r * (hi - lo);
  double fc = dist(c), fd = dist(d);
  for (int it = 0; it < 32 && hi - lo > 1e-12; ++it) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = dist(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = dist(d);
    }
  }
  Candidate best = fc <= fd ? Candidate{c, fc} : Candidate{d, fd};

  // Polish on the stationarity condition (y - x) . y' = 0, which is the derivative of the
  // squared distance; an Illinois-style false position converges to full precision in tau.
  double plo = std::max(a, lo - (hi - lo));
  double phi_ = std::min(b, hi + (hi - lo));
  double glo = phi(orbit, x, plo), ghi = phi(orbit, x, phi_);
  if (glo < 0.0 && ghi > 0.0) {
    int side = 0;
    for (int it = 0; it < 100 && phi_ - plo > 1e-12 * std::max(1.0, std::abs(plo)); ++it) {
      const double m = (plo * ghi - phi_ * glo) / (ghi - glo);
      const double gm = phi(orbit, x, m);
      if (gm == 0.0) {
        plo = phi_ = m;
        break;
      }
      if (gm < 0.0) {
        plo = m;
        glo = gm;
        if (side == -1) ghi *= 0.5;
        side = -1;
      } else {
        phi_ = m;
        ghi = gm;
        if (side == 1) glo *= 0.5;
        side = 1;
      }
    }
    const double tau = 0.5 * (plo + phi_);
    const double dt = dist(tau);
    if (dt <= best.d) best = {tau, dt};
  }
  for (double end : {a, b}) {
    const double de = dist(end);
    if (de < best.d) best = {end, de};
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// PeriodicOrbit

PeriodicOrbit::PeriodicOrbit(State x_star, double T_star, FlowSegment flow, double ds_rel,
                             int block_size)
    : x_star_(std::move(x_star)), T_star_(T_star), flow_(std::move(flow)) {
  if (!(ds_rel > 0.0)) throw Error(ErrorKind::PreconditionViolated, "ds_rel must be positive");
  if (block_size < 1) throw Error(ErrorKind::PreconditionViolated, "block_size must be >= 1");
  diameter_ = approximate_diameter(flow_);
  ds_max_ = ds_rel * (diameter_ > 0.0 ? diameter_ : 1.0);

  const double t0 = flow_.t0();
  taus_.push_back(0.0);
  samples_.push_back(flow_.x0());
  std::vector<double> ts;
  std::vector<State> ys;
  for (const DenseStep& step : flow_.steps()) {
    ts.clear();
    ys.clear();
    constexpr int kPieces = 4;
    double ta = step.t0;
    State ya = step.y0;
    for (int k = 1; k <= kPieces; ++k) {
      const double tb = k == kPieces ? step.t1() : step.t0 + step.h * k / kPieces;
      const State yb = k == kPieces ? step.y1 : step.eval(tb);
      refine_chord(step, ta, ya, tb, yb, ds_max_, 0, ts, ys);
      ta = tb;
      ya = yb;
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      taus_.push_back(ts[i] - t0);
      samples_.push_back(std::move(ys[i]));
    }
  }
  if (!taus_.empty()) taus_.back() = T_star_;

  for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
    max_spacing_ = std::max(max_spacing_, (samples_[i + 1] - samples_[i]).norm());
  }

  const std::size_t bs = static_cast<std::size_t>(block_size);
  for (std::size_t begin = 0; begin < samples_.size(); begin += bs) {
    Block b;
    b.begin = begin;
    b.end = std::min(samples_.size(), begin + bs);
    b.center = State::Zero(samples_[begin].size());
    for (std::size_t i = b.begin; i < b.end; ++i) b.center += samples_[i];
    b.center /= static_cast<double>(b.end - b.begin);
    for (std::size_t i = b.begin; i < b.end; ++i) {
      b.radius = std::max(b.radius, (samples_[i] - b.center).norm());
    }
    blocks_.push_back(std::move(b));
  }
}

PeriodicOrbit build_orbit(const HybridSystemDef& sys, const StabilityReport& report,
                          const OrbitConfig& cfg) {
  if (!report.converged) {
    throw Error(ErrorKind::PreconditionViolated, "build_orbit needs a converged stability report");
  }
  if (!(report.T_star > 0.0) || !std::isfinite(report.T_star)) {
    throw Error(ErrorKind::PreconditionViolated, "report period must be positive and finite");
  }
  const State y0 = sys.eval_delta(report.x_star, sys.zero_v());
  const ContinuousSignal u = ContinuousSignal::zero(sys.p);
  FlowSegment seg = integrate(sys, y0, u, 0.0, report.T_star, cfg.solver.integ);
  const double closure = (seg.x1() - report.x_star).norm();
  const double allowed = cfg.closure_tol * std::max(1.0, report.x_star.norm());
  if (!(closure <= allowed)) {
    throw Error(ErrorKind::ClosureError,
                "flow from delta(x*, 0) misses x* after T* by " + std::to_string(closure),
                report.T_star, -1, closure);
  }
  return PeriodicOrbit(report.x_star, report.T_star, std::move(seg), cfg.ds_rel, cfg.block_size);
}

// ---------------------------------------------------------------------------
// Distance

double coarse_distance(const PeriodicOrbit& orbit, const State& x) {
  const auto& blocks = orbit.blocks();
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    order.emplace_back((x - blocks[b].center).norm() - blocks[b].radius, b);
  }
  std::sort(order.begin(), order.end());
  double best = (x - orbit.x_star()).norm();
  const auto& ys = orbit.samples();
  for (const auto& [lower, b] : order) {
    if (lower >= best) break;
    for (std::size_t i = blocks[b].begin; i < blocks[b].end; ++i) {
      best = std::min(best, (x - ys[i]).norm());
    }
  }
  return best;
}

OrbitDistance dist_to_orbit(const PeriodicOrbit& orbit, const State& x) {
  const auto& ys = orbit.samples();
  const auto& taus = orbit.taus();
  const double d0 = coarse_distance(orbit, x);
  const double threshold = d0 + 2.0 * orbit.max_spacing();

  std::vector<Candidate> cands;
  cands.push_back({orbit.T_star(), (x - orbit.x_star()).norm()});
  std::vector<std::size_t> intervals;
  for (const auto& blk : orbit.blocks()) {
    if ((x - blk.center).norm() - blk.radius > threshold) continue;
    for (std::size_t i = blk.begin; i < blk.end; ++i) {
      const double di = (x - ys[i]).norm();
      if (di > threshold) continue;
      cands.push_back({taus[i], di});
      if (i > 0) intervals.push_back(i - 1);
      if (i + 1 < ys.size()) intervals.push_back(i);
    }
  }
  std::sort(intervals.begin(), intervals.end());
  intervals.erase(std::unique(intervals.begin(), intervals.end()), intervals.end());
  for (std::size_t i : intervals) {
    if (taus[i + 1] > taus[i]) cands.push_back(minimize_interval(orbit, x, taus[i], taus[i + 1]));
  }

  double d = kInf;
  for (const auto& c : cands) d = std::min(d, c.d);

  std::vector<Candidate> near;
  for (const auto& c : cands) {
    if (c.d <= d + 1e-9) near.push_back(c);
  }
  std::sort(near.begin(), near.end(), [](const Candidate& a, const Candidate& b) { return a.tau < b.tau; });
  double gap = 0.0;
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) gap = std::max(gap, taus[i + 1] - taus[i]);
  gap *= 1.01;

  OrbitDistance out;
  out.d = d;
  Candidate cluster_best = near.front();
  double cluster_last = near.front().tau;
  for (std::size_t i = 1; i < near.size(); ++i) {
    if (near[i].tau - cluster_last <= gap) {
      if (near[i].d < cluster_best.d) cluster_best = near[i];
    } else {
      out.tau_set.push_back(cluster_best.tau);
      cluster_best = near[i];
    }
    cluster_last = near[i].tau;
  }
  out.tau_set.push_back(cluster_best.tau);
  return out;
}

// ---------------------------------------------------------------------------
// Distance sandwich certificate

void Prop1Report::require_no_violations() const {
  if (violations > 0) {
    throw Error(ErrorKind::UpperBoundViolation,
                std::to_string(violations) + " samples with dist(x, O) > |x - x*| + 1e-9",
                std::numeric_limits<double>::quiet_NaN(), static_cast<std::ptrdiff_t>(violations),
                upper_bound_margin);
  }
}

std::vector<double> default_prop1_radii(const PeriodicOrbit& orbit, int decades, int per_decade,
                                        bool far_field) {
  if (decades < 0 || per_decade < 1) {
    throw Error(ErrorKind::PreconditionViolated, "radius schedule needs decades >= 0, per_decade >= 1");
  }
  const double diam = orbit.diameter() > 0.0 ? orbit.diameter() : 1.0;
  std::vector<double> radii;
  for (int k = 0; k <= decades * per_decade; ++k) {
    radii.push_back(diam * std::pow(10.0, -decades + static_cast<double>(k) / per_decade));
  }
  if (far_field) {
    for (double m : {10.0, 100.0, 1000.0}) radii.push_back(diam * m);
  }
  return radii;
}

Prop1Report certify_prop1(const PeriodicOrbit& orbit, const HybridSystemDef& sys,
                          std::size_t n_samples, const std::vector<double>& radii,
                          std::uint64_t seed, std::optional<int> chart_index, int threads) {
  if (radii.empty()) throw Error(ErrorKind::PreconditionViolated, "radius schedule is empty");
  for (double r : radii) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw Error(ErrorKind::PreconditionViolated, "radii must be finite and non-negative");
    }
  }
  const SurfaceChart chart(sys, orbit.x_star(), chart_index);
  const Eigen::VectorXd z_star = chart.project(orbit.x_star());
  const int m = chart.dim();

  enum class Status { Ok, Degenerate, Embedding };
  std::vector<Prop1Sample> records(n_samples);
  std::vector<Status> status(n_samples, Status::Ok);

  parallel_for(n_samples, threads, [&](std::size_t s) {
    SplitMix64 rng(derive_seed(seed, s));
    const double r = radii[s % radii.size()];
    Eigen::VectorXd dir(m);
    if (m == 1) {
      dir[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else if (m > 1) {
      do {
        for (int i = 0; i < m; ++i) dir[i] = rng.normal();
      } while (dir.norm() == 0.0);
      dir.normalize();
    }
    Prop1Sample& rec = records[s];
    rec.radius = r;
    State x;
    try {
      x = chart.embed(z_star + r * dir);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ChartSingular) throw;
      status[s] = Status::Embedding;
      return;
    }
    rec.dist_to_xstar = (x - orbit.x_star()).norm();
    rec.dist_to_orbit = dist_to_orbit(orbit, x).d;
    if (rec.dist_to_xstar < 1e-12) status[s] = Status::Degenerate;
  });

  Prop1Report rep;
  rep.samples = n_samples;
  rep.radii = radii;
  rep.seed = seed;
  rep.lambda_hat = kInf;
  rep.upper_bound_margin = kInf;
  for (std::size_t s = 0; s < n_samples; ++s) {
    if (status[s] == Status::Embedding) {
      ++rep.skipped_embedding;
      continue;
    }
    const auto& rec = records[s];
    if (rec.dist_to_orbit > rec.dist_to_xstar + 1e-9) ++rep.violations;
    rep.upper_bound_margin = std::min(rep.upper_bound_margin, rec.dist_to_xstar - rec.dist_to_orbit);
    if (status[s] == Status::Degenerate) {
      ++rep.skipped_degenerate;
      continue;
    }
    rep.lambda_hat = std::min(rep.lambda_hat, rec.dist_to_orbit / rec.dist_to_xstar);
  }
  if (!std::isfinite(rep.lambda_hat)) rep.lambda_hat = 0.0;
  if (!std::isfinite(rep.upper_bound_margin)) rep.upper_bound_margin = 0.0;
  rep.records = std::move(records);
  return rep;
}

double min_orbit_speed(const PeriodicOrbit& orbit, const HybridSystemDef& sys) {
  const Input u0 = sys.zero_u();
  double v = kInf;
  for (const State& y : orbit.samples()) v = std::min(v, sys.eval_f(y, u0).norm());
  return v;
}

std::size_t injectivity_violations(const PeriodicOrbit& orbit, double floor, double min_speed) {
  const auto& ys = orbit.samples();
  const auto& taus = orbit.taus();
  const auto& blocks = orbit.blocks();
  if (ys.empty()) return 0;
  const double min_gap = min_speed > 0.0 ? 2.0 * orbit.ds_max() / min_speed : kInf;
  const bool cyclic = (ys.front() - ys.back()).norm() < floor;
  const double period = orbit.T_star();
  std::size_t count = 0;
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    for (std::size_t b = a; b < blocks.size(); ++b) {
      if ((blocks[a].center - blocks[b].center).norm() - blocks[a].radius - blocks[b].radius >= floor) {
        continue;
      }
      for (std::size_t i = blocks[a].begin; i < blocks[a].end; ++i) {
        const std::size_t j0 = a == b ? i + 1 : blocks[b].begin;
        for (std::size_t j = j0; j < blocks[b].end; ++j) {
          double gap = std::abs(taus[j] - taus[i]);
          if (cyclic) gap = std::min(gap, period - gap);
          if (gap > min_gap && (ys[i] - ys[j]).norm() < floor) ++count;
        }
      }
    }
  }
  return count;
}

}  // namespace sie
