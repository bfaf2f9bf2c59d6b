#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "sie/core.hpp"

namespace sie {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 1'000'000;
  /// State norm above which the run is declared a blowup.
  double blowup_norm = 1e8;

  void validate() const;
  /// Tolerances used for fixed-point solving and linearization.
  static IntegratorConfig tight();
};

/// One accepted Dormand-Prince step with its 4th-order continuous extension.
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  double t_end = 0.0;  ///< t0 + h, pinned exactly when a step lands on a requested time
  State y0;
  State y1;
  std::array<State, 3> rcont;  // Hairer's rcont3..rcont5; rcont1 = y0, rcont2 = y1 - y0

  [[nodiscard]] double t1() const noexcept { return t_end; }
  [[nodiscard]] State eval(double t) const;
  /// Time derivative of the interpolant.
  [[nodiscard]] State derivative(double t) const;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  double min_step = std::numeric_limits<double>::infinity();
  double max_step = 0.0;
};

/// Dense solution of x' = f(x, u(t)) over [t0, t1].
class FlowSegment {
 public:
  FlowSegment() = default;
  FlowSegment(double t0, State x0);

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double t1() const noexcept { return steps_.empty() ? t0_ : steps_.back().t1(); }
  [[nodiscard]] const State& x0() const noexcept { return x0_; }
  [[nodiscard]] const State& x1() const noexcept { return steps_.empty() ? x0_ : steps_.back().y1; }
  /// Dense output. Returns the stored endpoints exactly at t0 and t1; clamps outside.
  [[nodiscard]] State eval(double t) const;
  /// Time derivative of the dense output (zero for an empty segment).
  [[nodiscard]] State derivative(double t) const;
  [[nodiscard]] const std::vector<DenseStep>& steps() const noexcept { return steps_; }
  [[nodiscard]] const StepStats& stats() const noexcept { return stats_; }
  [[nodiscard]] bool empty() const noexcept { return steps_.empty(); }
  /// Index of the step containing t (the later one at shared boundaries).
  [[nodiscard]] std::size_t step_index(double t) const;

  void append(DenseStep step);
  /// Replace the last step (used when an event truncates it).
  void replace_last(DenseStep step);
  /// Drop all steps after index i (exclusive) and replace step i.
  void truncate_at(std::size_t i, DenseStep step);
  StepStats& mutable_stats() noexcept { return stats_; }

 private:
  double t0_ = 0.0;
  State x0_;
  std::vector<DenseStep> steps_;
  StepStats stats_;
};

/// Single Dormand-Prince step from (t0, y0) with step h and no error control.
[[nodiscard]] DenseStep dopri_step(const HybridSystemDef& sys, const ContinuousSignal& u, double t0,
                                   const State& y0, double h);

/**
 * @brief Adaptive Dormand-Prince 5(4) stepper.
 *
 * The input is evaluated on the global clock inside f at every stage time. Each call to
 * advance() produces exactly one accepted step ending no later than t_limit.
 */
class FlowStepper {
 public:
  FlowStepper(const HybridSystemDef& sys, const ContinuousSignal& u, const IntegratorConfig& cfg,
              double t0, const State& x0);

  /// Take one accepted step towards t_limit. Throws StepLimitExceeded / Blowup /
  /// EvaluatorFailure.
  const DenseStep& advance(double t_limit);

  [[nodiscard]] double t() const noexcept { return t_; }
  [[nodiscard]] const State& x() const noexcept { return x_; }
  [[nodiscard]] const StepStats& stats() const noexcept { return stats_; }

 private:
  double initial_step(double t_limit);

  const HybridSystemDef& sys_;
  const ContinuousSignal& u_;
  IntegratorConfig cfg_;
  double t_;
  State x_;
  State k1_;
  double h_ = 0.0;
  bool last_rejected_ = false;
  DenseStep last_;
  StepStats stats_;
};

/// Solution over [t0, t1] (absolute times).
[[nodiscard]] FlowSegment integrate(const HybridSystemDef& sys, const State& x0,
                                    const ContinuousSignal& u, double t0, double t1,
                                    const IntegratorConfig& cfg = {});
/// Solution over [0, T].
[[nodiscard]] FlowSegment integrate(const HybridSystemDef& sys, const State& x0,
                                    const ContinuousSignal& u, double T,
                                    const IntegratorConfig& cfg = {});

/// integrate() variant that keeps the partial segment when the run fails.
struct FlowResult {
  FlowSegment segment;
  std::optional<Error> error;
};
[[nodiscard]] FlowResult integrate_partial(const HybridSystemDef& sys, const State& x0,
                                           const ContinuousSignal& u, double t0, double t1,
                                           const IntegratorConfig& cfg = {});

struct Sensitivity {
  State derivative;       ///< central difference at step h
  State derivative_half;  ///< central difference at step h/2
  double step = 0.0;
  /// Richardson estimate of the error in `derivative_half`: |D(h) - D(h/2)| / 3.
  double error_estimate = 0.0;
};

/// Directional derivative of x -> phi(T, x, u) along a unit direction.
[[nodiscard]] Sensitivity flow_sensitivity(const HybridSystemDef& sys, const State& x0,
                                           const ContinuousSignal& u, double T,
                                           const IntegratorConfig& cfg, const State& direction);

}  // namespace sie
