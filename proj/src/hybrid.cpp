#include "sie/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sie {

double GuardConfig::resolved_min_dwell(double t_final) const {
  if (min_dwell > 0.0) return min_dwell;
  if (period_hint && *period_hint > 0.0) return 1e-6 * *period_hint;
  return 1e-9 * t_final;
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::HorizonReached: return "horizon-reached";
    case Termination::ZenoGuard: return "zeno-guard";
    case Termination::BeatingGuard: return "beating-guard";
    case Termination::Escape: return "escape";
    case Termination::Error: return "error";
  }
  return "error";
}

std::size_t HybridTrajectory::segment_at(double t) const {
  if (segments.empty()) return 0;
  const auto it = std::upper_bound(segments.begin(), segments.end(), t,
                                   [](double value, const FlowSegment& s) { return value < s.t0(); });
  if (it == segments.begin()) return 0;
  return static_cast<std::size_t>(it - segments.begin()) - 1;
}

State HybridTrajectory::eval(double t) const {
  if (segments.empty()) {
    return impacts.empty() ? State() : impacts.back().x_plus;
  }
  const std::size_t i = segment_at(t);
  // An impact that closed the record after the last segment ended.
  if (i + 1 == segments.size() && !impacts.empty() && impacts.back().t <= t &&
      impacts.back().t >= segments.back().t1()) {
    return impacts.back().x_plus;
  }
  return segments[i].eval(t);
}

HybridTrajectory simulate(const HybridSystemDef& sys, const State& x0, const ContinuousSignal& u,
                          const DiscreteSequence& vbar, double t_final, const GuardConfig& guards,
                          const SolverConfig& cfg) {
  if (!(t_final > 0.0)) throw Error(ErrorKind::PreconditionViolated, "t_final must be > 0");
  if (vbar.dim() != sys.q) throw Error(ErrorKind::PreconditionViolated, "discrete input dimension mismatch");
  const double tol = cfg.events.event_tol;
  const double h0 = sys.eval_h(x0);
  if (h0 < -tol) throw Error(ErrorKind::PreconditionViolated, "initial state lies in S-");

  HybridTrajectory traj;
  traj.t_final = t_final;
  const double slack = 1e-9 * std::max(1.0, t_final);
  const double min_dwell = guards.resolved_min_dwell(t_final);
  std::vector<double> dwells;
  std::optional<double> last_impact;

  // Applies the reset at t_hit; returns false when a guard ends the run.
  auto reset = [&](double t_hit, const State& x_minus, State& x_plus) -> bool {
    const std::size_t k = traj.impacts.size();
    ImpactRecord rec;
    rec.k = k;
    rec.t = t_hit;
    rec.x_minus = x_minus;
    rec.v = vbar.at(k);
    rec.x_plus = sys.eval_delta(x_minus, rec.v);
    x_plus = rec.x_plus;
    traj.impacts.push_back(rec);
    if (x_plus.norm() > cfg.integ.blowup_norm) {
      traj.termination = Termination::Escape;
      traj.message = "post-impact state exceeded the blowup bound";
      return false;
    }
    if (!guards.enabled) {
      last_impact = t_hit;
      return true;
    }
    if (last_impact) {
      const double dwell = t_hit - *last_impact;
      dwells.push_back(dwell);
      if (dwell < min_dwell) {
        traj.termination = Termination::ZenoGuard;
        traj.message = "dwell " + std::to_string(dwell) + " below min_dwell at impact " + std::to_string(k);
        return false;
      }
      const auto w = static_cast<std::size_t>(std::max(guards.zeno_window, 1));
      if (dwells.size() > w) {
        double worst = 0.0;
        bool shrinking = true;
        for (std::size_t j = dwells.size() - w; j < dwells.size(); ++j) {
          const double r = dwells[j] / dwells[j - 1];
          shrinking = shrinking && r > 0.0 && r <= guards.zeno_ratio;
          worst = std::max(worst, r);
        }
        if (shrinking && t_hit + dwell * worst / (1.0 - worst) < t_final) {
          traj.termination = Termination::ZenoGuard;
          traj.message = "impact times accumulate (dwell ratio <= " + std::to_string(worst) +
                         ") at impact " + std::to_string(k);
          return false;
        }
      }
    }
    if (k + 1 >= guards.k_max) {
      traj.termination = Termination::ZenoGuard;
      traj.message = "impact count reached k_max";
      return false;
    }
    if (!sys.continuous_adapter && sys.eval_h(x_plus) <= tol &&
        sys.lie_derivative(x_plus, u.eval(t_hit)) <= 0.0) {
      traj.termination = Termination::BeatingGuard;
      traj.message = "reset maps into S with no flow back into S+ at impact " + std::to_string(k);
      return false;
    }
    last_impact = t_hit;
    return true;
  };

  double t = 0.0;
  State x = x0;
  try {
    if (std::abs(h0) <= tol) {
      State xp;
      if (!reset(0.0, x0, xp)) return traj;
      x = xp;
    }
    for (;;) {
      ImpactSearch search = flow_to_impact(sys, x, u, t, t_final + slack, cfg);
      traj.segments.push_back(std::move(search.segment));
      if (!search.event) {
        traj.termination = Termination::HorizonReached;
        break;
      }
      State xp;
      if (!reset(search.event->t_hit, search.event->x_minus, xp)) break;
      t = search.event->t_hit;
      x = std::move(xp);
      if (t >= t_final) {
        traj.termination = Termination::HorizonReached;
        break;
      }
    }
  } catch (const Error& e) {
    traj.termination = e.kind() == ErrorKind::Blowup ? Termination::Escape : Termination::Error;
    traj.message = e.what();
  }
  return traj;
}

std::vector<std::pair<std::size_t, State>> poincare_sequence(const HybridTrajectory& traj) {
  if (traj.impacts.empty()) throw Error(ErrorKind::NoImpacts, "trajectory has no impacts");
  std::vector<std::pair<std::size_t, State>> out;
  out.reserve(traj.impacts.size());
  for (const auto& imp : traj.impacts) out.emplace_back(imp.k, imp.x_minus);
  return out;
}

}  // namespace sie
