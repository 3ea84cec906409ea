#include "sirid/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "sirid/csv.hpp"
#include "sirid/parallel.hpp"

namespace sirid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using State7 = Eigen::Matrix<double, 7, 1>;

// (s, i), their derivatives in beta and gamma, and the accumulated flow w.
State7 sensitivity_rhs(double beta, double gamma, const State7& y) {
  const double s = y(0), i = y(1);
  const double flow = beta * s * i;
  const double dflow_b = s * i + beta * (y(2) * i + s * y(3));
  const double dflow_g = beta * (y(4) * i + s * y(5));
  State7 out;
  out << -flow, flow - gamma * i, -dflow_b, dflow_b - gamma * y(3), -dflow_g,
      dflow_g - i - gamma * y(5), flow;
  return out;
}

std::optional<double> checked_sigma(std::optional<double> sigma, const LikelihoodSpec& spec) {
  if (spec.sigma_inferred) {
    require(sigma.has_value(), ErrorKind::invalid_argument,
            "log_likelihood: sigma is inferred and must be supplied");
    require(std::isfinite(*sigma) && *sigma > 0.0, ErrorKind::invalid_argument,
            "log_likelihood: sigma must be positive");
  } else {
    require(!sigma.has_value(), ErrorKind::invalid_argument,
            "log_likelihood: sigma supplied but the spec fixes the noise");
  }
  return sigma;
}

}  // namespace

void validate(const LikelihoodSpec& spec) {
  require(spec.obs.days() >= 1, ErrorKind::insufficient_data,
          "likelihood: at least one observation is required");
  require(spec.obs.reporting_rate > 0.0 && spec.obs.reporting_rate <= 1.0,
          ErrorKind::config_validation, "likelihood: reporting rate must lie in (0, 1]");
  require(!(spec.sigma_inferred && spec.noise.kind() == NoiseKind::known_sequence),
          ErrorKind::config_validation,
          "likelihood: sigma can only be inferred for a scaled noise kind");
  require(spec.steps_per_day >= 1, ErrorKind::config_validation,
          "likelihood: steps_per_day must be >= 1");
}

SensitivityPath integrate_sensitivities(double beta, double gamma, const InitialCondition& init,
                                        int horizon, int steps_per_day) {
  require(std::isfinite(beta) && std::isfinite(gamma) && beta > 0.0 && gamma > 0.0,
          ErrorKind::invalid_argument, "integrate_sensitivities: rates must be positive");
  require(horizon >= 1 && steps_per_day >= 1, ErrorKind::invalid_argument,
          "integrate_sensitivities: horizon and steps_per_day must be >= 1");
  const auto rhs = [beta, gamma](const State7& y) { return sensitivity_rhs(beta, gamma, y); };
  const double h = 1.0 / steps_per_day;

  SensitivityPath path(7, horizon + 1);
  State7 y = State7::Zero();
  y(0) = init.s0();
  y(1) = init.i0();
  State7 carry = State7::Zero();
  path.col(0) = y;
  for (int d = 1; d <= horizon; ++d) {
    for (int k = 0; k < steps_per_day; ++k) rk4_step_compensated(rhs, y, carry, h);
    if (!y.allFinite()) {
      fail(ErrorKind::integration_failure,
           "integrate_sensitivities: non-finite state on day " + std::to_string(d));
    }
    path.col(d) = y;
  }
  return path;
}

LikelihoodValue evaluate_log_likelihood(double beta, double gamma, std::optional<double> sigma,
                                        const LikelihoodSpec& spec, bool with_gradient) {
  validate(spec);
  sigma = checked_sigma(sigma, spec);
  const NoiseModel noise = sigma ? spec.noise.with_sigma(*sigma) : spec.noise;
  const int days = spec.obs.days();
  const double n = spec.init.population();
  const double p = spec.obs.reporting_rate;

  const SensitivityPath path =
      integrate_sensitivities(beta, gamma, spec.init, days, spec.steps_per_day);
  const Eigen::VectorXd infected = path.row(1).segment(1, days).transpose();
  const Eigen::VectorXd sd = sigma_sequence(noise, n, infected);

  const bool full = spec.variance_gradient == VarianceGradient::full;
  LikelihoodValue out{0.0, {}};
  if (with_gradient) out.gradient = Eigen::VectorXd::Zero(sigma ? 3 : 2);

  for (int t = 1; t <= days; ++t) {
    const double sd_t = sd(t - 1);
    if (!(sd_t > 0.0) || !std::isfinite(sd_t)) {
      fail(ErrorKind::degenerate_variance,
           "log_likelihood: sigma_t is not positive on day " + std::to_string(t));
    }
    const double delta = n * (path(6, t) - path(6, t - 1));
    const double resid = spec.obs.values(t - 1) - p * delta;
    const double z2 = (resid * resid) / (sd_t * sd_t);
    out.value += -0.5 * std::log(2.0 * std::numbers::pi * sd_t * sd_t) - 0.5 * z2;
    if (!with_gradient) continue;

    // d sigma_t / d theta relative to sigma_t.
    double rel_b = 0.0, rel_g = 0.0;
    if (noise.kind() == NoiseKind::case2) {
      rel_b = path(3, t) / path(1, t);
      rel_g = path(5, t) / path(1, t);
    } else if (noise.kind() == NoiseKind::infection_root) {
      rel_b = 0.5 * path(3, t) / path(1, t);
      rel_g = 0.5 * path(5, t) / path(1, t);
    }
    const double ddelta_b = n * (path(2, t - 1) - path(2, t));
    const double ddelta_g = n * (path(4, t - 1) - path(4, t));
    const double var_weight = full ? (-1.0 + z2) : -1.0;
    out.gradient(0) += resid / (sd_t * sd_t) * p * ddelta_b + var_weight * rel_b;
    out.gradient(1) += resid / (sd_t * sd_t) * p * ddelta_g + var_weight * rel_g;
    if (sigma) out.gradient(2) += (-1.0 + z2) / *sigma;
  }
  require(std::isfinite(out.value), ErrorKind::integration_failure,
          "log_likelihood: non-finite value");
  return out;
}

double log_likelihood(const SirParams& params, std::optional<double> sigma,
                      const LikelihoodSpec& spec) {
  return evaluate_log_likelihood(params.beta(), params.gamma(), sigma, spec, false).value;
}

Eigen::VectorXd log_likelihood_gradient(const SirParams& params, std::optional<double> sigma,
                                        const LikelihoodSpec& spec) {
  return evaluate_log_likelihood(params.beta(), params.gamma(), sigma, spec, true).gradient;
}

std::optional<double> growth_rate_estimate(const ObservationSeries& obs) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (int t = 1; t <= obs.days(); ++t) {
    const double y = obs.values(t - 1);
    if (!(y > 0.0)) continue;
    const double ly = std::log(y);
    sx += t;
    sy += ly;
    sxx += static_cast<double>(t) * t;
    sxy += t * ly;
    ++m;
  }
  if (m < 2) return std::nullopt;
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  const double slope = (m * sxy - sx * sy) / denom;
  if (!(slope > 0.0) || !std::isfinite(slope)) return std::nullopt;
  return slope;
}

std::vector<SirParams> default_starts(const ObservationSeries& obs, int count) {
  require(count >= 1, ErrorKind::invalid_argument, "default_starts: count must be >= 1");
  const double delta0 = growth_rate_estimate(obs).value_or(0.1);
  std::vector<SirParams> starts;
  starts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double beta = delta0 * (1.0 + std::ldexp(1.0, k - 1));
    starts.emplace_back(beta, beta - delta0);
  }
  return starts;
}

namespace {

// Profile maximizer of sigma at fixed (beta, gamma): sigma_t = sigma u_t.
double profile_sigma(const SirParams& params, const LikelihoodSpec& spec) {
  const int days = spec.obs.days();
  const Trajectory traj = integrate_exact(params, spec.init, days, spec.steps_per_day);
  const Eigen::VectorXd delta = incidence(traj);
  constexpr double kRef = 0.5;
  const Eigen::VectorXd unit = sigma_sequence(spec.noise.with_sigma(kRef), traj, days) / kRef;
  const Eigen::ArrayXd z = (spec.obs.values - spec.obs.reporting_rate * delta).array() / unit.array();
  double sigma = std::sqrt(z.square().mean());
  if (!(sigma > 1e-8) || !std::isfinite(sigma)) sigma = 1e-8;
  if (spec.noise.kind() == NoiseKind::case1) sigma = std::min(sigma, 0.99);
  return sigma;
}

}  // namespace

MleResult fit_mle(const LikelihoodSpec& spec, const std::vector<SirParams>& starts,
                  const std::vector<double>& sigma_starts, const FitOptions& options) {
  validate(spec);
  require(!starts.empty(), ErrorKind::invalid_argument, "fit_mle: no starting points");
  require(sigma_starts.empty() || (spec.sigma_inferred && sigma_starts.size() == starts.size()),
          ErrorKind::invalid_argument,
          "fit_mle: sigma starts need an inferred sigma and one value per start");

  const bool with_sigma = spec.sigma_inferred;
  const Objective objective = [&spec, with_sigma](const Eigen::VectorXd& x,
                                                  Eigen::VectorXd& gradient) {
    const Eigen::VectorXd theta = x.array().exp();
    const std::optional<double> sigma = with_sigma ? std::optional<double>(theta(2)) : std::nullopt;
    const LikelihoodValue v = evaluate_log_likelihood(theta(0), theta(1), sigma, spec, true);
    gradient = -(v.gradient.array() * theta.array()).matrix();
    return -v.value;
  };

  std::optional<MleResult> best;
  std::ostringstream diagnostics;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const SirParams& start = starts[k];
    diagnostics << "\n  start " << k << " (" << start.beta() << ", " << start.gamma() << "): ";
    try {
      Eigen::VectorXd x0(with_sigma ? 3 : 2);
      x0(0) = std::log(start.beta());
      x0(1) = std::log(start.gamma());
      if (with_sigma) {
        x0(2) = std::log(sigma_starts.empty() ? profile_sigma(start, spec) : sigma_starts[k]);
      }
      const BfgsResult r = bfgs_minimize(objective, x0, options.bfgs);
      diagnostics << r.message << ", loglik " << -r.value << ", gradient "
                  << r.gradient.lpNorm<Eigen::Infinity>() << ", iterations " << r.iterations;
      if (!r.converged) continue;
      if (best && -r.value <= best->loglik) continue;
      const Eigen::VectorXd theta = r.x.array().exp();
      MleResult m{theta(0),
                  theta(1),
                  with_sigma ? std::optional<double>(theta(2)) : std::nullopt,
                  -r.value,
                  true,
                  r.iterations,
                  theta(0) / theta(1),
                  theta(0) - theta(1),
                  r.gradient.lpNorm<Eigen::Infinity>(),
                  {}};
      m.loglik_trace.reserve(r.trace.size());
      for (double f : r.trace) m.loglik_trace.push_back(-f);
      best = std::move(m);
    } catch (const Error& e) {
      diagnostics << e.what();
    }
  }
  if (!best) {
    fail(ErrorKind::optimization_failure,
         "fit_mle: no start converged" + diagnostics.str());
  }
  return *best;
}

MleEnsemble mle_ensemble(const SirParams& true_params, const InitialCondition& init,
                         const NoiseModel& noise, double p, int days, int replicates,
                         std::uint64_t seed, const EnsembleOptions& options) {
  require(replicates >= 1, ErrorKind::config_validation,
          "mle_ensemble: replicates must be >= 1");
  require(days >= 1, ErrorKind::config_validation, "mle_ensemble: days must be >= 1");
  const Trajectory truth = integrate_exact(true_params, init, days, options.steps_per_day);

  // Zero noise leaves every sigma_t = 0; the likelihood maximizer is then the
  // least-squares fit, so fit with unit weights.
  NoiseModel fit_noise = noise;
  if (noise.kind() == NoiseKind::known_sequence && noise.sigma_t().size() >= days &&
      noise.sigma_t().head(days).maxCoeff() == 0.0) {
    fit_noise = NoiseModel::known(Eigen::VectorXd::Ones(days));
  }

  MleEnsemble out{std::vector<MleResult>(static_cast<std::size_t>(replicates)),
                  seed, true_params, init, noise, p, days, 0};
  std::vector<char> failed(static_cast<std::size_t>(replicates), 0);
  parallel_for(static_cast<std::size_t>(replicates), options.threads, [&](std::size_t r) {
    try {
      const ObservationSeries obs = observe(truth, noise, p, days, rng::derive_seed(seed, r));
      LikelihoodSpec spec{obs, init, fit_noise, false, VarianceGradient::full,
                          options.steps_per_day};
      out.replicates[r] = fit_mle(spec, default_starts(obs, options.starts), {}, options.fit);
    } catch (const Error&) {
      out.replicates[r] = MleResult{kNaN, kNaN, std::nullopt, kNaN, false, 0,
                                    kNaN, kNaN, kNaN, {}};
      failed[r] = 1;
    }
  });
  out.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  if (out.failures * 20 > replicates) {
    fail(ErrorKind::optimization_failure,
         "mle_ensemble: " + std::to_string(out.failures) + " of " + std::to_string(replicates) +
             " replicate fits failed");
  }
  return out;
}

EnsembleSummary summarize(const MleEnsemble& ensemble) {
  std::vector<double> b, g;
  for (const MleResult& r : ensemble.replicates) {
    if (!r.converged) continue;
    b.push_back(r.beta_hat);
    g.push_back(r.gamma_hat);
  }
  const auto m = static_cast<Eigen::Index>(b.size());
  require(m >= 2, ErrorKind::insufficient_data, "summarize: fewer than two converged replicates");
  const Eigen::ArrayXd beta = Eigen::Map<const Eigen::ArrayXd>(b.data(), m);
  const Eigen::ArrayXd gamma = Eigen::Map<const Eigen::ArrayXd>(g.data(), m);
  const Eigen::ArrayXd delta = beta - gamma;
  const Eigen::ArrayXd r0 = beta / gamma;
  const auto centered = [](const Eigen::ArrayXd& a) { return (a - a.mean()).eval(); };
  const auto sd = [&](const Eigen::ArrayXd& a) {
    return std::sqrt(centered(a).square().sum() / static_cast<double>(a.size() - 1));
  };
  const double cov = (centered(beta) * centered(gamma)).sum();
  const double var_g = centered(gamma).square().sum();
  return EnsembleSummary{static_cast<int>(m), cov / var_g, r0.minCoeff(), r0.maxCoeff(),
                         sd(beta), sd(gamma), sd(delta)};
}

void write_ensemble_csv(std::ostream& out, const MleEnsemble& ensemble) {
  out << "replicate,beta_hat,gamma_hat,sigma_hat,loglik,converged\n";
  for (std::size_t r = 0; r < ensemble.replicates.size(); ++r) {
    const MleResult& m = ensemble.replicates[r];
    out << r << ',' << csv::format(m.beta_hat) << ',' << csv::format(m.gamma_hat) << ','
        << (m.sigma_hat ? csv::format(*m.sigma_hat) : std::string()) << ','
        << csv::format(m.loglik) << ',' << (m.converged ? 1 : 0) << '\n';
  }
}

}  // namespace sirid
