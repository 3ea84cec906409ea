#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sirid/core.hpp"
#include "sirid/optimize.hpp"
#include "sirid/simulate.hpp"

namespace sirid {

/// How the parameter dependence of sigma_t enters the quadratic term of the
/// gradient when sigma_t is driven by the model's i_t.
enum class VarianceGradient {
  full,     // differentiate sigma_t everywhere
  plug_in,  // hold sigma_t fixed inside the quadratic term
};

struct LikelihoodSpec {
  ObservationSeries obs;
  InitialCondition init;
  NoiseModel noise;
  bool sigma_inferred = false;
  VarianceGradient variance_gradient = VarianceGradient::full;
  int steps_per_day = kDefaultStepsPerDay;
};

/// Throws config_validation if sigma is inferred for a known sequence.
void validate(const LikelihoodSpec& spec);

/// Day-sampled solution of the SIR system augmented with forward
/// sensitivities. Rows: s, i, ds/dbeta, di/dbeta, ds/dgamma, di/dgamma and
/// the accumulated new-infection share w = s0 - s; column d is day d. Integrated with the same RK4 substeps as
/// integrate_exact, so the sensitivities are the exact derivatives of the
/// discrete solution. Accepts any beta, gamma > 0, including delta <= 0.
using SensitivityPath = Eigen::Matrix<double, 7, Eigen::Dynamic>;
SensitivityPath integrate_sensitivities(double beta, double gamma, const InitialCondition& init,
                                        int horizon, int steps_per_day = kDefaultStepsPerDay);

/// Full Gaussian log-likelihood of Y_1..Y_T. `sigma` is required exactly
/// when the spec infers sigma.
double log_likelihood(const SirParams& params, std::optional<double> sigma,
                      const LikelihoodSpec& spec);

/// Gradient with respect to (beta, gamma[, sigma]).
Eigen::VectorXd log_likelihood_gradient(const SirParams& params, std::optional<double> sigma,
                                        const LikelihoodSpec& spec);

/// Value and gradient at raw rates, which need not satisfy beta > gamma.
struct LikelihoodValue {
  double value;
  Eigen::VectorXd gradient;  // empty unless requested
};
LikelihoodValue evaluate_log_likelihood(double beta, double gamma, std::optional<double> sigma,
                                        const LikelihoodSpec& spec, bool with_gradient);

struct MleResult {
  double beta_hat;
  double gamma_hat;
  std::optional<double> sigma_hat;
  double loglik;
  bool converged;
  int iterations;
  double r0_hat;
  double delta_hat;
  double gradient_norm;               // inf-norm in log coordinates
  std::vector<double> loglik_trace;   // accepted steps of the winning start
};

struct FitOptions {
  BfgsOptions bfgs;
};

/// Early growth rate from a least-squares line through log Y_t on the
/// positive observations; nullopt when fewer than two are positive or the
/// slope is not positive.
std::optional<double> growth_rate_estimate(const ObservationSeries& obs);

/// `count` starts along delta = delta0: beta_k = delta0 (1 + 2^{k-1}).
std::vector<SirParams> default_starts(const ObservationSeries& obs, int count = 8);

/// Maximizes the likelihood from every start in log coordinates and keeps
/// the best converged optimum. Without sigma starts, each start's sigma is
/// its profile maximizer.
MleResult fit_mle(const LikelihoodSpec& spec, const std::vector<SirParams>& starts,
                  const std::vector<double>& sigma_starts = {}, const FitOptions& options = {});

struct EnsembleOptions {
  int threads = 1;
  int starts = 8;
  int steps_per_day = kDefaultStepsPerDay;
  FitOptions fit;
};

struct MleEnsemble {
  std::vector<MleResult> replicates;  // failed fits: converged = false, NaN estimates
  std::uint64_t seed_base;
  SirParams true_params;
  InitialCondition init;
  NoiseModel noise;
  double reporting_rate;
  int days;
  int failures;
};

/// Simulates `replicates` data sets from the true parameters (seed of
/// replicate r: rng::derive_seed(seed, r)) and fits each. Throws
/// optimization_failure if more than 5% of the fits fail.
MleEnsemble mle_ensemble(const SirParams& true_params, const InitialCondition& init,
                         const NoiseModel& noise, double p, int days, int replicates,
                         std::uint64_t seed, const EnsembleOptions& options = {});

struct EnsembleSummary {
  int used;  // converged replicates
  double slope_beta_on_gamma;
  double r0_min;
  double r0_max;
  double sd_beta;
  double sd_gamma;
  double sd_delta;
};

EnsembleSummary summarize(const MleEnsemble& ensemble);

/// CSV with header replicate,beta_hat,gamma_hat,sigma_hat,loglik,converged.
void write_ensemble_csv(std::ostream& out, const MleEnsemble& ensemble);

}  // namespace sirid
