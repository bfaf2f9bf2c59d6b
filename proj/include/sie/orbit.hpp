#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "sie/poincare.hpp"

namespace sie {

struct OrbitConfig {
  SolverConfig solver = SolverConfig::tight();
  /// Sample spacing bound as a fraction of the orbit diameter.
  double ds_rel = 1e-3;
  /// Allowed |phi(T*, delta(x*, 0), 0) - x*| / max(1, |x*|).
  double closure_tol = 1e-8;
  /// Samples per bounding ball in the distance search.
  int block_size = 32;
};

/**
 * @brief The unforced periodic orbit O = { phi(tau, delta(x*, 0), 0) : tau in [0, T*) }.
 *
 * Stored with the forward parameterization tau in [0, T*], y(0) = delta(x*, 0) and
 * y(T*) = x* (the closure point). backward_tau() converts to the parameterization running back
 * from x*.
 */
class PeriodicOrbit {
 public:
  PeriodicOrbit(State x_star, double T_star, FlowSegment flow, double ds_rel, int block_size);

  [[nodiscard]] const State& x_star() const noexcept { return x_star_; }
  [[nodiscard]] double T_star() const noexcept { return T_star_; }
  [[nodiscard]] const FlowSegment& flow() const noexcept { return flow_; }
  [[nodiscard]] const std::vector<double>& taus() const noexcept { return taus_; }
  [[nodiscard]] const std::vector<State>& samples() const noexcept { return samples_; }
  [[nodiscard]] double diameter() const noexcept { return diameter_; }
  [[nodiscard]] double ds_max() const noexcept { return ds_max_; }
  /// Largest spacing between consecutive samples actually achieved.
  [[nodiscard]] double max_spacing() const noexcept { return max_spacing_; }

  [[nodiscard]] State eval(double tau) const { return flow_.eval(flow_.t0() + tau); }
  [[nodiscard]] double backward_tau(double tau) const noexcept { return T_star_ - tau; }

  struct Block {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    State center;
    double radius = 0.0;
  };
  [[nodiscard]] const std::vector<Block>& blocks() const noexcept { return blocks_; }

 private:
  State x_star_;
  double T_star_;
  FlowSegment flow_;
  std::vector<double> taus_;
  std::vector<State> samples_;
  std::vector<Block> blocks_;
  double diameter_ = 0.0;
  double ds_max_ = 0.0;
  double max_spacing_ = 0.0;
};

/// Integrates the unforced flow from delta(x*, 0) over [0, T*]. Throws ClosureError when the
/// flow does not return to x*.
[[nodiscard]] PeriodicOrbit build_orbit(const HybridSystemDef& sys, const StabilityReport& report,
                                        const OrbitConfig& cfg = {});

struct OrbitDistance {
  double d = 0.0;
  /// Every forward tau attaining the minimum to within 1e-9 (tau = T* stands for x*).
  std::vector<double> tau_set;
};

/// dist(x, closure(O)): pruned search over the samples, then golden-section and parabolic
/// refinement on the neighbouring interpolant intervals.
[[nodiscard]] OrbitDistance dist_to_orbit(const PeriodicOrbit& orbit, const State& x);

/// Minimum over samples only, with bounding-ball pruning (no refinement).
[[nodiscard]] double coarse_distance(const PeriodicOrbit& orbit, const State& x);

struct Prop1Sample {
  double radius = 0.0;
  double dist_to_xstar = 0.0;
  double dist_to_orbit = 0.0;
};

struct Prop1Report {
  double lambda_hat = 0.0;  ///< min dist(x, O) / |x - x*| over non-degenerate samples
  std::size_t violations = 0;
  /// min over samples of |x - x*| - dist(x, O) (>= 0 when the upper bound holds)
  double upper_bound_margin = 0.0;
  std::size_t samples = 0;
  std::size_t skipped_degenerate = 0;
  std::size_t skipped_embedding = 0;
  std::vector<double> radii;
  std::uint64_t seed = 0;
  std::vector<Prop1Sample> records;

  /// Throws UpperBoundViolation when any sample broke dist(x, O) <= |x - x*| + 1e-9.
  void require_no_violations() const;
};

/**
 * @brief Empirical check of lambda |x - x*| <= dist(x, O) <= |x - x*| on S.
 *
 * Draws n_samples chart-embedded points on S spread evenly over the radius schedule, with a
 * uniformly random direction in chart coordinates at each draw.
 */
[[nodiscard]] Prop1Report certify_prop1(const PeriodicOrbit& orbit, const HybridSystemDef& sys,
                                        std::size_t n_samples, const std::vector<double>& radii,
                                        std::uint64_t seed, std::optional<int> chart_index = std::nullopt,
                                        int threads = 1);

/// Log-spaced radii from 10^-decades * diameter up to the diameter, plus (optionally) a far-field
/// sweep at 10, 100 and 1000 diameters.
[[nodiscard]] std::vector<double> default_prop1_radii(const PeriodicOrbit& orbit, int decades = 4,
                                                      int per_decade = 3, bool far_field = true);

/// min over the orbit samples of |f(y_i, 0)|.
[[nodiscard]] double min_orbit_speed(const PeriodicOrbit& orbit, const HybridSystemDef& sys);

/// Sample pairs with |tau_i - tau_j| > 2 ds_max / min_speed that lie closer than `floor`. The tau
/// gap is measured cyclically when the orbit's reset is the identity at x*.
[[nodiscard]] std::size_t injectivity_violations(const PeriodicOrbit& orbit, double floor,
                                                 double min_speed);

}  // namespace sie
