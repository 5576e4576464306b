#pragma once

#include <stdexcept>
#include <string>

namespace bmlselect {

/// Failure categories surfaced by the numerical layers. The CLI maps every
/// one of them to exit status 3.
enum class ErrorKind {
  covariance_not_pd,
  parameter_out_of_range,
  singular_design,
  degenerate_variance,
  saturated_model,
  penalty_undefined,
  lambda_estimation_failed,
  candidate_explosion,
  no_admissible_candidate,
  invalid_argument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::covariance_not_pd: return "covariance not PD";
    case ErrorKind::parameter_out_of_range: return "parameter out of range";
    case ErrorKind::singular_design: return "singular design";
    case ErrorKind::degenerate_variance: return "degenerate variance";
    case ErrorKind::saturated_model: return "saturated model";
    case ErrorKind::penalty_undefined: return "penalty undefined";
    case ErrorKind::lambda_estimation_failed: return "lambda estimation failed";
    case ErrorKind::candidate_explosion: return "candidate explosion";
    case ErrorKind::no_admissible_candidate: return "no admissible candidate";
    case ErrorKind::invalid_argument: return "invalid argument";
  }
  return "unknown";
}

class NumericalError : public std::runtime_error {
 public:
  NumericalError(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed user input (CSV, config, grid values). Exit status 2 at the CLI.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bmlselect
