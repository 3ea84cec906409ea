#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sirid {

enum class ErrorKind {
  invalid_argument,
  integration_failure,
  degenerate_parameter,
  insufficient_data,
  horizon_too_short,
  perturbation_too_large,
  degenerate_variance,
  indistinguishable_hypotheses,
  no_detectable_perturbation,
  optimization_failure,
  fit_degenerate,
  malformed_csv,
  missing_date,
  negative_count,
  duplicate_date,
  empty_series,
  config_validation,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace sirid
