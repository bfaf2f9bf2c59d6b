#include "sie/events.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sie {

namespace {

struct Bracket {
  double ta;  // H > 0
  double tb;  // H <= 0
};

/// Tracks the sign of H along successive samples. A + to - crossing only counts once the flow
/// has been seen strictly inside S+ ("armed"), so flows that start on S and head into S- (the
/// identity-reset adapter) or leave S into S+ (a bounce) are handled uniformly.
class CrossingScanner {
 public:
  CrossingScanner(double t_start, double h_start, double tol)
      : armed_(h_start > tol), last_positive_(t_start) {}

  std::optional<Bracket> feed(double t, double h) {
    if (h > 0.0) {
      armed_ = true;
      last_positive_ = t;
      return std::nullopt;
    }
    if (armed_) return Bracket{last_positive_, t};
    return std::nullopt;
  }

 private:
  bool armed_;
  double last_positive_;
};

std::optional<Bracket> scan_step(CrossingScanner& scanner, const DenseStep& step, double after,
                                 const HybridSystemDef& sys, int interior) {
  const double span = step.t1() - step.t0;
  for (int j = 1; j <= interior + 1; ++j) {
    const double s = j == interior + 1 ? step.t1() : step.t0 + span * j / (interior + 1);
    if (s <= after) continue;
    if (auto b = scanner.feed(s, sys.eval_h(step.eval(s)))) return b;
  }
  return std::nullopt;
}

struct Localized {
  ImpactEvent event;
  std::size_t step_index = 0;
  DenseStep exact;  // step from the containing step's start to t_hit
};

Localized localize(const FlowSegment& seg, const HybridSystemDef& sys, const ContinuousSignal& u,
                   Bracket br, const EventConfig& cfg) {
  double ta = br.ta;
  double tb = br.tb;
  for (int it = 0; it < 200 && (tb - ta) > cfg.bisect_rel * std::max(1.0, std::abs(tb)); ++it) {
    const double tm = 0.5 * (ta + tb);
    if (sys.eval_h(seg.eval(tm)) > 0.0) {
      ta = tm;
    } else {
      tb = tm;
    }
  }
  const double width = tb - ta;

  auto exact_at = [&](double t, std::size_t& idx) {
    idx = seg.step_index(t);
    const DenseStep& s = seg.steps()[idx];
    if (t < s.t0) t = s.t0;
    DenseStep d = dopri_step(sys, u, s.t0, s.y0, t - s.t0);
    d.t_end = t;
    return d;
  };

  const double lo = seg.t0();
  const double hi = seg.t1();
  double t = tb;
  std::size_t idx = 0;
  DenseStep exact = exact_at(t, idx);
  double hval = sys.eval_h(exact.y1);
  double best_abs = std::abs(hval);
  double best_t = t;
  std::size_t best_idx = idx;
  DenseStep best = exact;
  for (int it = 0; it < 8 && std::abs(hval) > 1e-3 * cfg.event_tol; ++it) {
    const double lfh = sys.lie_derivative(exact.y1, u.eval(t));
    if (lfh == 0.0) break;
    const double t_new = std::clamp(t - hval / lfh, lo, hi);
    if (t_new == t) break;
    t = t_new;
    exact = exact_at(t, idx);
    hval = sys.eval_h(exact.y1);
    if (std::abs(hval) < best_abs) {
      best_abs = std::abs(hval);
      best_t = t;
      best_idx = idx;
      best = exact;
    }
  }
  if (best_abs > cfg.event_tol) {
    throw Error(ErrorKind::GrazeDetected,
                "crossing could not be localized to |H| <= event_tol near t=" + std::to_string(best_t),
                best_t, -1, best_abs);
  }

  const Input u_hit = u.eval(best_t);
  const State fx = sys.eval_f(best.y1, u_hit);
  const State gx = sys.eval_grad_h(best.y1);
  const double lfh = gx.dot(fx);
  if (!(lfh < 0.0) || std::abs(lfh) < cfg.graze_rel * fx.norm() * gx.norm()) {
    throw Error(ErrorKind::GrazeDetected, "tangential contact with S at t=" + std::to_string(best_t),
                best_t, -1, lfh);
  }
  Localized out;
  out.event.t_hit = best_t;
  out.event.x_minus = best.y1;
  out.event.lfh = lfh;
  out.event.width = width;
  out.step_index = best_idx;
  out.exact = std::move(best);
  return out;
}

}  // namespace

void EventConfig::validate() const {
  if (!(event_tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "event_tol must be > 0");
  if (!(graze_rel >= 0.0)) throw Error(ErrorKind::InvalidConfig, "graze_rel must be >= 0");
  if (!(t_cap > 0.0)) throw Error(ErrorKind::InvalidConfig, "t_cap must be > 0");
  if (samples_per_step < 0) throw Error(ErrorKind::InvalidConfig, "samples_per_step must be >= 0");
  if (!(bisect_rel > 0.0)) throw Error(ErrorKind::InvalidConfig, "bisect_rel must be > 0");
}

SolverConfig SolverConfig::tight() {
  SolverConfig cfg;
  cfg.integ = IntegratorConfig::tight();
  return cfg;
}

std::optional<ImpactEvent> locate_crossing(const FlowSegment& seg, const HybridSystemDef& sys,
                                           const ContinuousSignal& u, double from_t,
                                           const EventConfig& cfg) {
  cfg.validate();
  if (seg.empty()) return std::nullopt;
  if (from_t < seg.t0() || from_t > seg.t1()) {
    throw Error(ErrorKind::PreconditionViolated, "from_t outside the segment");
  }
  CrossingScanner scanner(from_t, sys.eval_h(seg.eval(from_t)), cfg.event_tol);
  for (std::size_t i = seg.step_index(from_t); i < seg.steps().size(); ++i) {
    if (auto br = scan_step(scanner, seg.steps()[i], from_t, sys, cfg.samples_per_step)) {
      return localize(seg, sys, u, *br, cfg).event;
    }
  }
  return std::nullopt;
}

ImpactSearch flow_to_impact(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                            double t0, double t_end, const SolverConfig& cfg) {
  cfg.events.validate();
  ImpactSearch out{FlowSegment(t0, x0), std::nullopt};
  if (!(t_end > t0)) return out;
  FlowStepper stepper(sys, u, cfg.integ, t0, x0);
  CrossingScanner scanner(t0, sys.eval_h(x0), cfg.events.event_tol);
  while (stepper.t() < t_end) {
    const DenseStep& step = stepper.advance(t_end);
    out.segment.append(step);
    if (auto br = scan_step(scanner, step, t0, sys, cfg.events.samples_per_step)) {
      Localized loc = localize(out.segment, sys, u, *br, cfg.events);
      out.segment.truncate_at(loc.step_index, std::move(loc.exact));
      out.event = std::move(loc.event);
      break;
    }
  }
  out.segment.mutable_stats().accepted = stepper.stats().accepted;
  out.segment.mutable_stats().rejected = stepper.stats().rejected;
  out.segment.mutable_stats().evaluations = stepper.stats().evaluations;
  return out;
}

namespace {

TimeToImpact to_result(ImpactSearch&& search, double t0) {
  TimeToImpact r;
  if (search.event) {
    r.duration = search.event->t_hit - t0;
    r.x_next = search.event->x_minus;
    r.lfh = search.event->lfh;
  }
  r.segment = std::move(search.segment);
  return r;
}

}  // namespace

TimeToImpact time_to_impact(const HybridSystemDef& sys, const State& x, const ContinuousSignal& u,
                            const Input& v, const SolverConfig& cfg, double t0) {
  const double tol = cfg.events.event_tol;
  if (std::abs(sys.eval_h(x)) > tol) {
    throw Error(ErrorKind::PreconditionViolated, "time_to_impact needs a state on S");
  }
  const State xp = sys.eval_delta(x, v);
  if (!sys.continuous_adapter && sys.eval_h(xp) <= tol) {
    throw Error(ErrorKind::ResetNotInSPlus, "reset maps outside S+", t0);
  }
  return to_result(flow_to_impact(sys, xp, u, t0, t0 + cfg.events.t_cap, cfg), t0);
}

TimeToImpact time_to_impact_from_splus(const HybridSystemDef& sys, const State& x,
                                       const ContinuousSignal& u, const SolverConfig& cfg, double t0) {
  if (!(sys.eval_h(x) > cfg.events.event_tol)) {
    throw Error(ErrorKind::PreconditionViolated, "time_to_impact_from_splus needs H(x) > event_tol");
  }
  return to_result(flow_to_impact(sys, x, u, t0, t0 + cfg.events.t_cap, cfg), t0);
}

}  // namespace sie
