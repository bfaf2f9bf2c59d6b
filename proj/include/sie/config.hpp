#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sie/hybrid.hpp"
#include "sie/iss.hpp"
#include "sie/models.hpp"
#include "sie/poincare.hpp"

namespace sie {

using Json = nlohmann::ordered_json;

struct SimulateBlock {
  double t_final = 10.0;
  /// Initial state; defaults to delta(x_ref, 0) with x_ref the oracle fixed point (or the
  /// model's default guess).
  std::optional<std::vector<double>> x0;
  /// Spacing of the trajectory.csv grid; defaults to t_final / 1000.
  std::optional<double> sample_dt;
  /// Orbit report written by `sie orbit`; enables the dist_to_orbit column.
  std::optional<std::string> orbit_file;
};

struct OrbitBlock {
  std::optional<std::vector<double>> guess;
  std::optional<int> chart_index;
  double newton_tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 20;
  double margin = 1e-6;
  double ds_rel = 1e-3;
  double closure_tol = 1e-8;
};

struct CertifyBlock {
  std::size_t samples = 10000;
  int decades = 4;
  int per_decade = 3;
  bool far_field = true;
  /// Explicit radius schedule (absolute); overrides decades / per_decade / far_field.
  std::optional<std::vector<double>> radii;
};

struct SweepBlock {
  std::vector<double> offsets{1e-2};
  std::vector<double> u_amps{0.0};
  std::vector<double> v_amps{0.0};
  /// Amplitudes are multiples of the model's input scale.
  bool relative = false;
  bool paired = false;
  std::size_t trials = 10;
  double horizon_periods = 40.0;
  double cutoff = 0.5;
  int window_samples = 16;
  double F_max = 10.0;
  double zero_floor = 1e-6;
};

struct ValidateBlock {
  std::optional<std::vector<std::vector<double>>> probes;
  std::size_t random_probes = 32;
  double radius = 0.5;
  double grad_tol = 1e-5;
};

/// Everything a CLI run needs. Parsing is strict: unknown keys are errors.
struct RunConfig {
  std::string model = "linear-reset";
  ParamMap params;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  ContinuousSignal u = ContinuousSignal::zero(1);
  DiscreteSequence v = DiscreteSequence::zero(1);
  bool u_given = false;
  bool v_given = false;
  IntegratorConfig integrator;
  EventConfig events;
  GuardConfig guards;
  SimulateBlock simulate;
  OrbitBlock orbit;
  CertifyBlock certify;
  SweepBlock sweep;
  ValidateBlock validate;
  /// Directory of the config file, for resolving relative paths.
  std::filesystem::path base_dir;

  [[nodiscard]] SolverConfig solver() const { return {integrator, events}; }
  [[nodiscard]] FixedPointConfig fixed_point() const;
};

/// Throws InvalidConfig / UnknownModel / ParamOutOfRange.
[[nodiscard]] RunConfig parse_config(const Json& j);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] Json to_json(const RunConfig& cfg);

[[nodiscard]] Json signal_to_json(const ContinuousSignal& s);
[[nodiscard]] ContinuousSignal signal_from_json(const Json& j);
[[nodiscard]] Json sequence_to_json(const DiscreteSequence& s);
[[nodiscard]] DiscreteSequence sequence_from_json(const Json& j);

[[nodiscard]] Json vector_to_json(const Eigen::VectorXd& v);
[[nodiscard]] Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);

/// Stability report as written to orbit.json (the "report" block) and read back.
[[nodiscard]] Json report_to_json(const StabilityReport& r);
[[nodiscard]] StabilityReport report_from_json(const Json& j);

}  // namespace sie
