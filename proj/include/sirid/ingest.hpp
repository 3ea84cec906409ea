#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sirid/inference.hpp"

namespace sirid {

using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD; throws malformed_csv otherwise.
Date parse_date(std::string_view text);
std::string format_date(const Date& date);

struct DateRange {
  Date first;
  Date last;  // inclusive
};

/// Daily reported cases on consecutive days.
struct CaseData {
  std::vector<Date> dates;
  std::vector<std::int64_t> counts;
  double population;
  std::string label;

  friend bool operator==(const CaseData&, const CaseData&) = default;
};

/// Reads a `date,count` CSV (extra columns ignored), keeps rows inside the
/// range and requires every day of the range to be present.
CaseData read_cases(std::istream& in, double population, std::optional<DateRange> range = {},
                    std::string label = {});
CaseData load_cases(const std::filesystem::path& path, double population,
                    std::optional<DateRange> range = {});
/// Writes the `date,count` form read_cases accepts.
void save_cases(std::ostream& out, const CaseData& data);

/// Likelihood with the first day as t = 0 (one infected individual) and the
/// remaining counts as Y_1..Y_T, variance N i_t sigma^2, sigma inferred.
LikelihoodSpec case_likelihood(const CaseData& data, double p,
                               int steps_per_day = kDefaultStepsPerDay);

/// Fit of the case likelihood at one reporting rate from the default starts.
MleResult fit_cases(const CaseData& data, double p, const FitOptions& options = {});

struct RateFit {
  double p;
  std::optional<MleResult> fit;
  std::string error;  // set when the fit failed
};

/// One fit per reporting rate; failures are recorded and the sweep continues.
std::vector<RateFit> reporting_rate_sweep(const CaseData& data, const std::vector<double>& p_values,
                                          const FitOptions& options = {});

/// CSV with header p,beta_hat,gamma_hat,sigma_hat,r0_hat,loglik,converged,error.
void write_rate_table_csv(std::ostream& out, const std::vector<RateFit>& table);

struct FittedBand {
  Eigen::VectorXd times;  // 1..T
  Eigen::VectorXd mean;   // p N (s_{t-1} - s_t)
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double z;
};

/// mean +/- z sigma_hat sqrt(N i_t) with z the two-sided normal quantile of `level`.
FittedBand fitted_band(const CaseData& data, const MleResult& fit, double p, double level);

/// CSV with header t,date,observed,mean,lower,upper.
void write_band_csv(std::ostream& out, const CaseData& data, const FittedBand& band);

/// Population size for which the fitted beta at reporting rate p equals
/// `target_beta`, by bisection on log N inside [lower, upper].
double tune_population(CaseData data, double p, double target_beta, double lower, double upper,
                       const FitOptions& options = {});

}  // namespace sirid
