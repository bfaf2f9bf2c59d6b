#pragma once

#include <limits>
#include <optional>

#include "sie/flow.hpp"

namespace sie {

struct EventConfig {
  /// Accepted |H(x_minus)| after localization.
  double event_tol = 1e-10;
  /// Crossings with |L_f H| < graze_rel * |f| * |dH/dx| are rejected as grazes.
  double graze_rel = 1e-8;
  /// Horizon after which the time to impact is reported as infinite.
  double t_cap = 100.0;
  /// Interior dense-output samples of H per accepted step when bracketing.
  int samples_per_step = 8;
  /// Bisection stops at width bisect_rel * max(1, t).
  double bisect_rel = 1e-13;

  void validate() const;
};

struct SolverConfig {
  IntegratorConfig integ;
  EventConfig events;

  static SolverConfig tight();
};

/// Pre-impact crossing of S along a flow, H going from + to -.
struct ImpactEvent {
  double t_hit = 0.0;
  State x_minus;
  double lfh = 0.0;    ///< L_f H at (x_minus, u(t_hit)); negative for accepted events
  double width = 0.0;  ///< final bracket width of the localization
};

/**
 * @brief First + to - crossing of H after from_t along an existing segment.
 *
 * Returns nullopt when H keeps its sign (NoCrossing). Throws GrazeDetected for tangential
 * contact. The crossing is bracketed on dense output, bisected, then polished with Newton
 * steps that re-integrate exactly from the start of the containing step.
 */
[[nodiscard]] std::optional<ImpactEvent> locate_crossing(const FlowSegment& seg,
                                                         const HybridSystemDef& sys,
                                                         const ContinuousSignal& u, double from_t,
                                                         const EventConfig& cfg = {});

struct ImpactSearch {
  FlowSegment segment;  ///< truncated at the crossing when one is found
  std::optional<ImpactEvent> event;
};

/// Integrate from (t0, x0) until the first + to - crossing or t_end, whichever comes first.
[[nodiscard]] ImpactSearch flow_to_impact(const HybridSystemDef& sys, const State& x0,
                                          const ContinuousSignal& u, double t0, double t_end,
                                          const SolverConfig& cfg);

struct TimeToImpact {
  double duration = std::numeric_limits<double>::infinity();
  State x_next;  ///< pre-impact state on S (empty when infinite)
  FlowSegment segment;
  double lfh = 0.0;
  [[nodiscard]] bool finite() const noexcept { return duration < std::numeric_limits<double>::infinity(); }
};

/// Time to impact of the reset-initialized flow phi(., delta(x, v), u), started at clock t0.
/// Infinite when no crossing happens within cfg.events.t_cap.
[[nodiscard]] TimeToImpact time_to_impact(const HybridSystemDef& sys, const State& x,
                                          const ContinuousSignal& u, const Input& v,
                                          const SolverConfig& cfg, double t0 = 0.0);

/// Time to impact of the free flow from x in S+ (no reset).
[[nodiscard]] TimeToImpact time_to_impact_from_splus(const HybridSystemDef& sys, const State& x,
                                                     const ContinuousSignal& u,
                                                     const SolverConfig& cfg, double t0 = 0.0);

}  // namespace sie
