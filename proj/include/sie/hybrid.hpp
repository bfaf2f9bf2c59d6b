#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sie/events.hpp"

namespace sie {

struct GuardConfig {
  bool enabled = true;
  std::size_t k_max = 10'000;
  /// Minimum dwell between impacts; <= 0 selects 1e-6 * period_hint when a period is known,
  /// else 1e-9 * t_final.
  double min_dwell = 0.0;
  std::optional<double> period_hint;
  /// Accumulation test: this many consecutive dwell ratios all <= zeno_ratio, with the
  /// geometric extrapolation of the impact times converging before t_final.
  int zeno_window = 8;
  double zeno_ratio = 0.9;

  [[nodiscard]] double resolved_min_dwell(double t_final) const;
};

enum class Termination { HorizonReached, ZenoGuard, BeatingGuard, Escape, Error };
[[nodiscard]] std::string_view to_string(Termination t) noexcept;

struct ImpactRecord {
  std::size_t k = 0;
  double t = 0.0;
  State x_minus;
  Input v;
  State x_plus;
};

/**
 * @brief Right-continuous hybrid solution.
 *
 * Segment i+1 starts at (t_k, x_k+) for the impact k that ended segment i. When the initial
 * state lies on S the reset is applied at t = 0 and recorded as impact 0.
 */
struct HybridTrajectory {
  std::vector<FlowSegment> segments;
  std::vector<ImpactRecord> impacts;
  double t_final = 0.0;
  Termination termination = Termination::HorizonReached;
  std::string message;

  /// x(t), taking x_k+ at impact times.
  [[nodiscard]] State eval(double t) const;
  /// Index of the segment that holds x(t) under right continuity.
  [[nodiscard]] std::size_t segment_at(double t) const;
};

[[nodiscard]] HybridTrajectory simulate(const HybridSystemDef& sys, const State& x0,
                                        const ContinuousSignal& u, const DiscreteSequence& vbar,
                                        double t_final, const GuardConfig& guards,
                                        const SolverConfig& cfg);

/// Pre-impact states x_k = lim_{t -> t_k-} x(t). Throws NoImpacts for an impact-free trajectory.
[[nodiscard]] std::vector<std::pair<std::size_t, State>> poincare_sequence(const HybridTrajectory& traj);

}  // namespace sie
