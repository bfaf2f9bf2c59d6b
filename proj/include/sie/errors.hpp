#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sie {

/// Failure categories surfaced by the library. Each maps to a stable token.
enum class ErrorKind {
  EvaluatorFailure,
  StepLimitExceeded,
  Blowup,
  GrazeDetected,
  ResetNotInSPlus,
  PreconditionViolated,
  NoImpacts,
  InfiniteTimeToImpact,
  NewtonDiverged,
  ChartSingular,
  ClosureError,
  UpperBoundViolation,
  FitDegenerate,
  UnknownModel,
  ParamOutOfRange,
  InvalidConfig,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        double time = std::numeric_limits<double>::quiet_NaN(),
        std::ptrdiff_t index = -1, double value = std::numeric_limits<double>::quiet_NaN());

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// Simulation time attached to the failure (NaN when not applicable).
  [[nodiscard]] double time() const noexcept { return time_; }
  /// Probe / iterate / impact index (-1 when not applicable).
  [[nodiscard]] std::ptrdiff_t index() const noexcept { return index_; }
  /// Auxiliary magnitude, e.g. the state norm for Blowup.
  [[nodiscard]] double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double time_;
  std::ptrdiff_t index_;
  double value_;
};

/// Newton failure carrying the iterate trace so callers can dump it.
class NewtonDivergedError : public Error {
 public:
  NewtonDivergedError(const std::string& message, std::vector<Eigen::VectorXd> iterates,
                      std::vector<double> residuals);

  [[nodiscard]] const std::vector<Eigen::VectorXd>& iterates() const noexcept { return iterates_; }
  [[nodiscard]] const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<Eigen::VectorXd> iterates_;
  std::vector<double> residuals_;
};

}  // namespace sie
