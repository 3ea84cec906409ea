#include "sirid/error.hpp"

namespace sirid {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::integration_failure: return "integration_failure";
    case ErrorKind::degenerate_parameter: return "degenerate_parameter";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::horizon_too_short: return "horizon_too_short";
    case ErrorKind::perturbation_too_large: return "perturbation_too_large";
    case ErrorKind::degenerate_variance: return "degenerate_variance";
    case ErrorKind::indistinguishable_hypotheses: return "indistinguishable_hypotheses";
    case ErrorKind::no_detectable_perturbation: return "no_detectable_perturbation";
    case ErrorKind::optimization_failure: return "optimization_failure";
    case ErrorKind::fit_degenerate: return "fit_degenerate";
    case ErrorKind::malformed_csv: return "malformed_csv";
    case ErrorKind::missing_date: return "missing_date";
    case ErrorKind::negative_count: return "negative_count";
    case ErrorKind::duplicate_date: return "duplicate_date";
    case ErrorKind::empty_series: return "empty_series";
    case ErrorKind::config_validation: return "config_validation";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace sirid
