#include "sie/errors.hpp"

#include <utility>

namespace sie {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EvaluatorFailure: return "evaluator_failure";
    case ErrorKind::StepLimitExceeded: return "step_limit_exceeded";
    case ErrorKind::Blowup: return "blowup";
    case ErrorKind::GrazeDetected: return "graze_detected";
    case ErrorKind::ResetNotInSPlus: return "reset_not_in_s_plus";
    case ErrorKind::PreconditionViolated: return "precondition_violated";
    case ErrorKind::NoImpacts: return "no_impacts";
    case ErrorKind::InfiniteTimeToImpact: return "infinite_time_to_impact";
    case ErrorKind::NewtonDiverged: return "newton_diverged";
    case ErrorKind::ChartSingular: return "chart_singular";
    case ErrorKind::ClosureError: return "closure_error";
    case ErrorKind::UpperBoundViolation: return "upper_bound_violation";
    case ErrorKind::FitDegenerate: return "fit_degenerate";
    case ErrorKind::UnknownModel: return "unknown_model";
    case ErrorKind::ParamOutOfRange: return "param_out_of_range";
    case ErrorKind::InvalidConfig: return "invalid_config";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, double time, std::ptrdiff_t index,
             double value)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      time_(time),
      index_(index),
      value_(value) {}

NewtonDivergedError::NewtonDivergedError(const std::string& message,
                                         std::vector<Eigen::VectorXd> iterates,
                                         std::vector<double> residuals)
    : Error(ErrorKind::NewtonDiverged, message, std::numeric_limits<double>::quiet_NaN(),
            static_cast<std::ptrdiff_t>(iterates.size())),
      iterates_(std::move(iterates)),
      residuals_(std::move(residuals)) {}

}  // namespace sie
