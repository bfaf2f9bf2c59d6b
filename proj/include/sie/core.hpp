#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sie/errors.hpp"

namespace sie {

using State = Eigen::VectorXd;
using Input = Eigen::VectorXd;

/**
 * @brief Forced system with impulse effects.
 *
 *   x' = f(x, u(t))          while H(x) != 0
 *   x+ = delta(x-, v_k)      when x- reaches S = {H = 0} from S+ = {H > 0}
 *
 * `grad_h` is optional; when empty the gradient is central-differenced.
 */
struct HybridSystemDef {
  std::string name;
  int n = 0;  ///< state dimension
  int p = 0;  ///< continuous-input dimension
  int q = 0;  ///< discrete-input dimension
  std::function<State(const State&, const Input&)> f;
  std::function<State(const State&, const Input&)> delta;
  std::function<double(const State&)> h;
  std::function<State(const State&)> grad_h;
  /// Continuous-time limit cycle wrapped as an SIE with identity reset. The reset lands on S,
  /// so the "reset must leave S" checks are waived and crossings are only counted once the
  /// flow has re-entered S+.
  bool continuous_adapter = false;

  // Checked evaluators: rethrow any evaluator exception or non-finite output as
  // ErrorKind::EvaluatorFailure.
  [[nodiscard]] State eval_f(const State& x, const Input& u) const;
  [[nodiscard]] State eval_delta(const State& x, const Input& v) const;
  [[nodiscard]] double eval_h(const State& x) const;
  /// Analytic gradient when provided, otherwise central differences with
  /// step 1e-6 * max(1, |x_i|).
  [[nodiscard]] State eval_grad_h(const State& x) const;
  /// Lie derivative L_f H = dH/dx . f(x, u).
  [[nodiscard]] double lie_derivative(const State& x, const Input& u) const;

  [[nodiscard]] Input zero_u() const { return Input::Zero(p); }
  [[nodiscard]] Input zero_v() const { return Input::Zero(q); }
};

[[nodiscard]] State central_difference_gradient(const std::function<double(const State&)>& h,
                                                const State& x);

/// Continuous-time input u : [0, inf) -> R^p.
class ContinuousSignal {
 public:
  enum class Kind { Zero, Constant, Sinusoid, Tabulated, Composite };

  static ContinuousSignal zero(int dim);
  static ContinuousSignal constant(const Input& value);
  /// u(t) = amplitude * sin(omega * t + phase)
  static ContinuousSignal sinusoid(const Input& amplitude, double omega, double phase = 0.0);
  /// Linear interpolation between samples; held constant outside [times.front(), times.back()].
  static ContinuousSignal tabulated(std::vector<double> times, std::vector<Input> values);
  static ContinuousSignal composite(std::vector<ContinuousSignal> terms);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] Input eval(double t) const;
  /// Upper bound on sup_t |u(t)|: exact for zero/constant/sinusoid/tabulated, sum of the terms'
  /// bounds for composites.
  [[nodiscard]] double sup_norm() const;
  /// t -> u(t + dt)
  [[nodiscard]] ContinuousSignal shifted(double dt) const;
  [[nodiscard]] ContinuousSignal scaled(double factor) const;

  // Raw parameters (for serialization).
  [[nodiscard]] const Input& value() const noexcept { return value_; }
  [[nodiscard]] double omega() const noexcept { return omega_; }
  [[nodiscard]] double phase() const noexcept { return phase_; }
  [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
  [[nodiscard]] const std::vector<Input>& samples() const noexcept { return samples_; }
  [[nodiscard]] const std::vector<ContinuousSignal>& terms() const noexcept { return terms_; }

 private:
  ContinuousSignal(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Input value_;  // constant value or sinusoid amplitude
  double omega_ = 0.0;
  double phase_ = 0.0;
  std::vector<double> times_;
  std::vector<Input> samples_;
  std::vector<ContinuousSignal> terms_;
};

/// Discrete-time input k -> v_k in R^q. Random access, immutable.
class DiscreteSequence {
 public:
  enum class Kind { Zero, Constant, IidUniform, Explicit };

  static DiscreteSequence zero(int dim);
  static DiscreteSequence constant(const Input& value);
  /// Component i of v_k is uniform on [-bound_i, bound_i], drawn from a SplitMix64 stream.
  static DiscreteSequence iid_uniform(const Input& bound, std::uint64_t seed);
  /// Listed values, zero past the end of the list.
  static DiscreteSequence explicit_values(std::vector<Input> values);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] Input at(std::size_t k) const;
  /// |value| for constants, |bound| for iid-uniform, max listed norm for explicit lists.
  [[nodiscard]] double sup_norm() const;
  [[nodiscard]] DiscreteSequence scaled(double factor) const;
  [[nodiscard]] DiscreteSequence reseeded(std::uint64_t seed) const;

  [[nodiscard]] const Input& value() const noexcept { return value_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] const std::vector<Input>& values() const noexcept { return values_; }

 private:
  DiscreteSequence(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Input value_;  // constant value or uniform bound
  std::uint64_t seed_ = 0;
  std::vector<Input> values_;
};

[[nodiscard]] double euclidean(const Eigen::Ref<const Eigen::VectorXd>& x);
/// min over the sample set of |x - y|; +inf for an empty set.
[[nodiscard]] double point_set_distance(const State& x, std::span<const State> samples);

struct ProbeResult {
  bool f_finite = true;
  bool delta_finite = true;
  bool h_finite = true;
  bool on_surface = false;
  double grad_norm = 0.0;
  /// Relative mismatch between the analytic gradient and central differences (0 when the
  /// system has no analytic gradient).
  double grad_mismatch = 0.0;
};

struct ValidationReport {
  std::vector<ProbeResult> probes;
  double max_grad_mismatch = 0.0;
  bool degenerate_gradient = false;
  bool all_finite = true;
  [[nodiscard]] bool passed(double grad_tol = 1e-5) const {
    return all_finite && !degenerate_gradient && max_grad_mismatch <= grad_tol;
  }
};

/// Spot-checks smoothness assumptions at the given probes. Throws EvaluatorFailure (with the
/// probe index) if an evaluator raises.
[[nodiscard]] ValidationReport validate_system(const HybridSystemDef& sys,
                                               std::span<const State> probes,
                                               double surface_tol = 1e-10);

}  // namespace sie
