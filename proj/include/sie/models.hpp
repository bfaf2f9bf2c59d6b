#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sie/core.hpp"

namespace sie {

using ParamMap = std::map<std::string, double>;

struct ParamSpec {
  std::string name;
  double default_value = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool min_exclusive = false;
  bool max_exclusive = false;
  std::string doc;
};

/// Closed-form (or reference-integration) ground truth for a model.
struct OraclePack {
  std::optional<State> x_star;
  std::optional<double> T_star;
  /// Dominant eigenvalue of the linearized Poincare map at x*.
  std::optional<double> eigenvalue;
  /// Relative half-width of the trusted band around T_star (0 for exact values).
  double T_band_rel = 0.0;
  /// Slope of the forced discrete fixed point in a constant continuous input, when linear.
  std::optional<double> forced_gain;
  /// Small-parameter asymptotic period, used as a consistency band.
  std::optional<double> asymptotic_period;
  std::string note;
};

struct ModelCatalogEntry {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  /// Which standing assumptions the model satisfies or violates.
  std::string assumptions;
  /// Amplitude of one "unit" of continuous / discrete input used when sweeps are specified
  /// relative to the model scale.
  double u_scale = 1.0;
  double v_scale = 1.0;
  /// Excluded from stability and ISS experiments (negative controls).
  bool negative_control = false;
};

[[nodiscard]] const std::vector<ModelCatalogEntry>& catalog();
/// Throws UnknownModel.
[[nodiscard]] const ModelCatalogEntry& catalog_entry(const std::string& name);

/// Defaults merged with `given`. Throws InvalidConfig for unknown parameter names and
/// ParamOutOfRange for values outside the schema.
[[nodiscard]] ParamMap resolve_params(const std::string& name, const ParamMap& given = {});

[[nodiscard]] HybridSystemDef model(const std::string& name, const ParamMap& params = {});
[[nodiscard]] std::optional<OraclePack> oracle(const std::string& name, const ParamMap& params = {});

/// Starting point for the fixed-point search (on S).
[[nodiscard]] State default_guess(const std::string& name, const ParamMap& params = {});

struct RegistrationCheck {
  bool has_fixed_point = false;
  /// H(delta(x*, 0)) > 0, or for continuous adapters the section being re-entered from S+.
  bool reset_in_splus = false;
  /// L_f H(x*, 0) < 0.
  bool transversal = false;
  double h_after_reset = 0.0;
  double lfh = 0.0;
  std::string note;
  [[nodiscard]] bool passed() const { return has_fixed_point && reset_in_splus && transversal; }
};

/// Direct evaluation of the reset-interior and transversality assumptions at the oracle fixed
/// point. Negative controls are expected to fail.
[[nodiscard]] RegistrationCheck check_registration(const std::string& name, const ParamMap& params = {});

}  // namespace sie
