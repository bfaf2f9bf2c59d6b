#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sie/hybrid.hpp"
#include "sie/orbit.hpp"

namespace sie {

struct SweepConfig {
  /// Initial offsets |z0 - z*| in surface-chart coordinates around x*.
  std::vector<double> offsets{1e-2};
  /// Continuous-input levels |u|_inf (the template is rescaled to each level).
  std::vector<double> u_amps{0.0};
  /// Discrete-input levels |v|_inf.
  std::vector<double> v_amps{0.0};
  /// Zip u_amps and v_amps into pairs instead of taking their product.
  bool paired = false;
  std::size_t trials = 10;
  double horizon_periods = 40.0;
  /// Fraction of the horizon treated as transient.
  double cutoff = 0.5;
  std::uint64_t seed = 0;
  ContinuousSignal u_template = ContinuousSignal::constant(Input::Ones(1));
  DiscreteSequence v_template = DiscreteSequence::constant(Input::Ones(1));
  SolverConfig solver;
  GuardConfig guards;
  /// Dense-output samples per inter-impact window for the supremum deviation.
  int window_samples = 16;
  /// Keep per-trial traces for every cell (zero-input cells always keep them).
  bool keep_traces = false;

  void validate() const;
};

struct TrialTrace {
  /// Start time and supremum orbital deviation of each inter-impact window.
  std::vector<double> window_t;
  std::vector<double> window_sup;
  /// Impact times and discrete deviations |x_k - x*| (k = 0 is the initial state).
  std::vector<double> impact_t;
  std::vector<double> discrete;
  Termination termination = Termination::HorizonReached;
  std::string message;
  double initial_orbital = 0.0;
  double initial_discrete = 0.0;
};

struct DecayFit {
  double N = 0.0;
  double omega = 0.0;  ///< decay rate per unit time (orbital) or per impact (discrete)
  double residual = 0.0;
  std::size_t points = 0;
};

struct DecayFitResult {
  DecayFit orbital;
  DecayFit discrete;
  double rho = 0.0;  ///< exp(-discrete.omega)
};

struct GuardTallies {
  std::size_t zeno = 0;
  std::size_t beating = 0;
  std::size_t escape = 0;
  std::size_t error = 0;
  [[nodiscard]] std::size_t total() const { return zeno + beating + escape + error; }
};

struct CellResult {
  std::size_t index = 0;
  double offset = 0.0;
  double u_amp = 0.0;
  double v_amp = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  std::vector<double> trial_orbital;
  std::vector<double> trial_discrete;
  double ultimate_orbital = 0.0;
  double ultimate_discrete = 0.0;
  double peak = 0.0;
  /// ultimate_orbital / ultimate_discrete (NaN when the discrete bound is zero).
  double cross_ratio = 0.0;
  GuardTallies guards;
  double dwell_min = 0.0;
  double dwell_max = 0.0;
  std::optional<DecayFitResult> fit;
  std::vector<TrialTrace> traces;
};

struct IssSweepReport {
  SweepConfig config;
  double T_star = 0.0;
  std::vector<CellResult> cells;
  /// 0.8 * shortest and 1.2 * longest observed inter-impact time over all cells.
  double T_lower = 0.0;
  double T_upper = 0.0;
};

/// Runs every (offset, u, v) cell. Guard terminations are tallied, never raised.
[[nodiscard]] IssSweepReport run_sweep(const HybridSystemDef& sys, const PeriodicOrbit& orbit,
                                       const StabilityReport& report, const SweepConfig& sweep,
                                       int threads = 1);

/// Single trial, exposed for tests and the CLI.
[[nodiscard]] TrialTrace run_trial(const HybridSystemDef& sys, const PeriodicOrbit& orbit,
                                   const StabilityReport& report, const State& x0,
                                   const ContinuousSignal& u, const DiscreteSequence& v,
                                   double t_final, const SolverConfig& solver, const GuardConfig& guards,
                                   int window_samples = 16);

/// Pooled log-linear fit of deviations normalized by their initial value. Points at or below
/// `floor` are dropped. Throws FitDegenerate with fewer than 5 runs or 10 usable points in a run.
[[nodiscard]] DecayFitResult fit_decay(const std::vector<TrialTrace>& zero_input_runs,
                                       double floor = 1e-9, std::size_t min_runs = 5,
                                       std::size_t min_points = 10);

struct GainFit {
  double c = 0.0;
  double residual = 0.0;
};
/// Least squares b = c * a through the origin.
[[nodiscard]] GainFit fit_gain(const std::vector<double>& amps, const std::vector<double>& bounds);

struct EquivalenceVerdict {
  bool monotone = true;
  std::size_t monotone_checks = 0;
  std::size_t monotone_violations = 0;
  bool factor_ok = true;
  double F = 1.0;
  double F_max = 10.0;
  bool zero_input_ok = true;
  double zero_input_max = 0.0;
  double zero_floor = 1e-6;
  [[nodiscard]] bool passed() const { return monotone && factor_ok && zero_input_ok; }
};

/// (a) ultimate bounds nondecreasing in each amplitude (bootstrap CI on the median difference),
/// (b) orbital and discrete bounds within a factor F_max, (c) zero-input bounds below zero_floor.
[[nodiscard]] EquivalenceVerdict check_equivalence(const IssSweepReport& rep, double F_max = 10.0,
                                                   double zero_floor = 1e-6,
                                                   std::size_t bootstrap = 2000);

[[nodiscard]] double median(std::vector<double> values);

}  // namespace sie
