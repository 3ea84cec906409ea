#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sirid/core.hpp"
#include "sirid/inference.hpp"
#include "sirid/perturb.hpp"
#include "sirid/simulate.hpp"

using namespace sirid;

namespace {

const SirParams kTruth(0.21, 0.07);

ObservationSeries noiseless(const SirParams& params, const InitialCondition& init, double p,
                            int days, const NoiseModel& noise) {
  const Trajectory traj = integrate_exact(params, init, days);
  return {p * incidence(traj), p, noise, 0};
}

LikelihoodSpec simulated_spec(NoiseModel noise, bool sigma_inferred) {
  const auto init = InitialCondition::from_population(1e5);
  const Trajectory traj = integrate_exact(kTruth, init, 40);
  const ObservationSeries obs = observe(traj, noise, 0.6, 40, 99);
  return {obs, init, noise, sigma_inferred};
}

// Central differences with a relative step.
Eigen::VectorXd numeric_gradient(const Eigen::VectorXd& x, const LikelihoodSpec& spec) {
  const auto f = [&](const Eigen::VectorXd& v) {
    const std::optional<double> sigma = v.size() == 3 ? std::optional<double>(v(2)) : std::nullopt;
    return evaluate_log_likelihood(v(0), v(1), sigma, spec, false).value;
  };
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * x(k);
    Eigen::VectorXd up = x, down = x;
    up(k) += h;
    down(k) -= h;
    g(k) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

void expect_gradient_matches(const LikelihoodSpec& spec, double sigma_hi) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> beta(0.15, 0.35), gamma(0.03, 0.12), sigma(0.1, sigma_hi);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(spec.sigma_inferred ? 3 : 2);
    x(0) = beta(gen);
    x(1) = gamma(gen);
    if (spec.sigma_inferred) x(2) = sigma(gen);
    const std::optional<double> s = spec.sigma_inferred ? std::optional<double>(x(2)) : std::nullopt;
    const Eigen::VectorXd analytic = evaluate_log_likelihood(x(0), x(1), s, spec, true).gradient;
    const Eigen::VectorXd numeric = numeric_gradient(x, spec);
    EXPECT_LT((analytic - numeric).lpNorm<Eigen::Infinity>(),
              1e-4 * analytic.lpNorm<Eigen::Infinity>())
        << "at " << x.transpose() << "\nanalytic " << analytic.transpose() << "\nnumeric  "
        << numeric.transpose();
  }
}

}  // namespace

TEST(LogLikelihood, NoiselessDataLeavesNormalization) {
  const auto init = InitialCondition::from_population(1e7);
  const Eigen::VectorXd sd = Eigen::VectorXd::Constant(120, std::sqrt(100.0 * 1e7));
  const NoiseModel noise = NoiseModel::known(sd);
  const LikelihoodSpec spec{noiseless(kTruth, init, 1.0, 120, noise), init, noise};
  const double expected =
      -0.5 * (2.0 * std::numbers::pi * sd.array().square()).log().sum();
  EXPECT_NEAR(log_likelihood(kTruth, std::nullopt, spec), expected, 1e-12 * std::abs(expected));
}

TEST(LogLikelihood, DifferenceMatchesLikelihoodRatioExpansion) {
  const auto init = InitialCondition::from_population(1e6);
  const int days = 50;
  const double p = 0.7;
  const Eigen::VectorXd sd = Eigen::VectorXd::LinSpaced(days, 500.0, 2000.0);
  const NoiseModel noise = NoiseModel::known(sd);
  const Perturbation pert(kTruth, 0.03, 1.0);
  const Trajectory null_traj = integrate_exact(kTruth, init, days);
  const LikelihoodSpec spec{observe(null_traj, noise, p, days, 17), init, noise};

  const Eigen::ArrayXd d0 = incidence(null_traj).array();
  const Eigen::ArrayXd d1 = incidence(integrate_exact(pert.perturbed(), init, days)).array();
  const Eigen::ArrayXd y = spec.obs.values.array();
  const double expansion =
      ((2.0 * p * y * (d1 - d0) - p * p * (d1.square() - d0.square())) / (2.0 * sd.array().square()))
          .sum();
  const double direct = log_likelihood(pert.perturbed(), std::nullopt, spec) -
                        log_likelihood(kTruth, std::nullopt, spec);
  EXPECT_NEAR(direct, expansion, 1e-8 * std::abs(expansion) + 1e-9);
}

TEST(LogLikelihood, RejectsZeroVariance) {
  const auto init = InitialCondition::from_population(1e5);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Zero(20));
  const LikelihoodSpec spec{noiseless(kTruth, init, 1.0, 20, noise), init, noise};
  try {
    log_likelihood(kTruth, std::nullopt, spec);
    FAIL() << "expected degenerate_variance";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_variance);
  }
}

TEST(LogLikelihood, ShuffledDaysLowerLikelihood) {
  const auto init = InitialCondition::from_population(1e6);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(60, 100.0));
  LikelihoodSpec spec{noiseless(kTruth, init, 1.0, 60, noise), init, noise};
  const double original = log_likelihood(kTruth, std::nullopt, spec);
  std::mt19937 gen(3);
  std::shuffle(spec.obs.values.begin(), spec.obs.values.end(), gen);
  EXPECT_LT(log_likelihood(kTruth, std::nullopt, spec), original);
}

TEST(LogLikelihood, SigmaArgumentMustMatchSpec) {
  LikelihoodSpec spec = simulated_spec(NoiseModel::case2(0.3), true);
  EXPECT_THROW(log_likelihood(kTruth, std::nullopt, spec), Error);
  spec.sigma_inferred = false;
  EXPECT_THROW(log_likelihood(kTruth, 0.3, spec), Error);
}

TEST(LikelihoodSpec, KnownSequenceCannotInferSigma) {
  const auto init = InitialCondition::from_population(1e5);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Ones(10));
  const LikelihoodSpec spec{noiseless(kTruth, init, 1.0, 10, noise), init, noise, true};
  try {
    validate(spec);
    FAIL() << "expected config_validation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config_validation);
  }
}

TEST(Gradient, KnownSequenceMatchesFiniteDifferences) {
  expect_gradient_matches(simulated_spec(NoiseModel::known(Eigen::VectorXd::Constant(40, 30.0)), false),
                          1.0);
}

TEST(Gradient, CaseOneWithSigmaMatchesFiniteDifferences) {
  expect_gradient_matches(simulated_spec(NoiseModel::case1(0.001), true), 0.9);
}

TEST(Gradient, CaseTwoFixedSigmaMatchesFiniteDifferences) {
  expect_gradient_matches(simulated_spec(NoiseModel::case2(0.3), false), 1.0);
}

TEST(Gradient, CaseTwoWithSigmaMatchesFiniteDifferences) {
  expect_gradient_matches(simulated_spec(NoiseModel::case2(0.3), true), 2.0);
}

TEST(Gradient, InfectionRootWithSigmaMatchesFiniteDifferences) {
  expect_gradient_matches(simulated_spec(NoiseModel::infection_root(1.5), true), 3.0);
}

TEST(Gradient, PlugInDiffersOnlyWhenVarianceDependsOnModel) {
  LikelihoodSpec c1 = simulated_spec(NoiseModel::case1(0.001), true);
  const Eigen::VectorXd full1 = log_likelihood_gradient(kTruth, 0.001, c1);
  c1.variance_gradient = VarianceGradient::plug_in;
  EXPECT_EQ(full1, log_likelihood_gradient(kTruth, 0.001, c1));

  LikelihoodSpec c2 = simulated_spec(NoiseModel::case2(0.3), true);
  const Eigen::VectorXd full2 = log_likelihood_gradient(kTruth, 0.3, c2);
  c2.variance_gradient = VarianceGradient::plug_in;
  const Eigen::VectorXd plug2 = log_likelihood_gradient(kTruth, 0.3, c2);
  EXPECT_GT((full2.head(2) - plug2.head(2)).norm(), 1e-6 * full2.head(2).norm());
  EXPECT_DOUBLE_EQ(full2(2), plug2(2));
}

TEST(Sensitivities, VanishWithoutInfection) {
  const SensitivityPath path = integrate_sensitivities(0.21, 0.07, InitialCondition(1.0, 0.0, 1e6), 50);
  EXPECT_EQ(path.middleRows(2, 4).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(path.row(1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sensitivities, StateRowsMatchExactIntegration) {
  const auto init = InitialCondition::from_population(1e6);
  const SensitivityPath path = integrate_sensitivities(0.21, 0.07, init, 100);
  const Trajectory traj = integrate_exact(kTruth, init, 100);
  EXPECT_LT((path.row(0).transpose() - traj.s()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((path.row(1).transpose() - traj.i()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FitMle, RecoversNoiselessTruth) {
  const auto init = InitialCondition::from_population(1e7);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(120, 1.0));
  const LikelihoodSpec spec{noiseless(kTruth, init, 1.0, 120, noise), init, noise};
  const MleResult m = fit_mle(spec, default_starts(spec.obs));
  ASSERT_TRUE(m.converged);
  EXPECT_NEAR(m.beta_hat / 0.21, 1.0, 5e-5);
  EXPECT_NEAR(m.gamma_hat / 0.07, 1.0, 5e-5);
  EXPECT_NEAR(m.r0_hat, m.beta_hat / m.gamma_hat, 1e-15);
  EXPECT_NEAR(m.delta_hat, m.beta_hat - m.gamma_hat, 1e-15);
}

TEST(FitMle, OptimumSatisfiesFirstOrderCondition) {
  const LikelihoodSpec spec = simulated_spec(NoiseModel::case2(0.3), true);
  const MleResult m = fit_mle(spec, default_starts(spec.obs));
  ASSERT_TRUE(m.converged);
  const Eigen::VectorXd g =
      log_likelihood_gradient(SirParams(m.beta_hat, m.gamma_hat), m.sigma_hat, spec);
  EXPECT_LT(g.norm(), 1e-6 * std::abs(m.loglik));
}

TEST(FitMle, TraceNeverDecreases) {
  const LikelihoodSpec spec = simulated_spec(NoiseModel::case2(0.3), true);
  const MleResult m = fit_mle(spec, default_starts(spec.obs));
  ASSERT_GE(m.loglik_trace.size(), 2u);
  for (std::size_t k = 1; k < m.loglik_trace.size(); ++k) {
    EXPECT_GE(m.loglik_trace[k], m.loglik_trace[k - 1]);
  }
  EXPECT_EQ(m.loglik_trace.back(), m.loglik);
}

TEST(FitMle, BestStartWins) {
  const LikelihoodSpec spec = simulated_spec(NoiseModel::case2(0.3), true);
  const auto starts = default_starts(spec.obs);
  const MleResult all = fit_mle(spec, starts);
  for (const auto& s : starts) {
    try {
      EXPECT_LE(fit_mle(spec, {s}).loglik, all.loglik + 1e-9);
    } catch (const Error&) {
    }
  }
}

TEST(FitMle, NoStartsRejected) {
  const LikelihoodSpec spec = simulated_spec(NoiseModel::case2(0.3), false);
  EXPECT_THROW(fit_mle(spec, {}), Error);
}

TEST(Starts, FollowGrowthRate) {
  const auto init = InitialCondition::from_population(1e7);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(60, 1.0));
  const ObservationSeries obs = noiseless(kTruth, init, 1.0, 60, noise);
  const auto delta0 = growth_rate_estimate(obs);
  ASSERT_TRUE(delta0.has_value());
  EXPECT_NEAR(*delta0, 0.14, 0.01);
  const auto starts = default_starts(obs, 4);
  ASSERT_EQ(starts.size(), 4u);
  for (const auto& s : starts) EXPECT_NEAR(s.delta(), *delta0, 1e-12);
}

TEST(Ensemble, ZeroNoiseReturnsTruth) {
  const auto init = InitialCondition::from_population(1e7);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Zero(120));
  const MleEnsemble e = mle_ensemble(kTruth, init, noise, 1.0, 120, 3, 1);
  EXPECT_EQ(e.failures, 0);
  for (const auto& r : e.replicates) {
    EXPECT_NEAR(r.beta_hat / 0.21, 1.0, 1e-6);
    EXPECT_NEAR(r.gamma_hat / 0.07, 1.0, 1e-6);
  }
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
  const auto init = InitialCondition::from_population(1e7);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(120, std::sqrt(1e9)));
  EnsembleOptions one, four;
  four.threads = 4;
  const MleEnsemble a = mle_ensemble(kTruth, init, noise, 1.0, 120, 6, 77, one);
  const MleEnsemble b = mle_ensemble(kTruth, init, noise, 1.0, 120, 6, 77, four);
  ASSERT_EQ(a.replicates.size(), 6u);
  std::ostringstream ca, cb;
  write_ensemble_csv(ca, a);
  write_ensemble_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')),
            "replicate,beta_hat,gamma_hat,sigma_hat,loglik,converged");
}

TEST(Ensemble, RejectsZeroReplicates) {
  const auto init = InitialCondition::from_population(1e7);
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(120, 1.0));
  try {
    mle_ensemble(kTruth, init, noise, 1.0, 120, 0, 1);
    FAIL() << "expected config_validation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config_validation);
  }
}

TEST(Ensemble, SummaryOfLine) {
  MleEnsemble e{{}, 0, kTruth, InitialCondition::from_population(1e7),
                NoiseModel::case1(0.1), 1.0, 120, 0};
  for (int k = 0; k < 5; ++k) {
    const double g = 0.05 + 0.01 * k;
    e.replicates.push_back({g + 0.14, g, std::nullopt, 0.0, true, 1, (g + 0.14) / g, 0.14, 0.0, {}});
  }
  e.replicates.push_back({std::nan(""), std::nan(""), std::nullopt, 0.0, false, 0, 0, 0, 0, {}});
  const EnsembleSummary s = summarize(e);
  EXPECT_EQ(s.used, 5);
  EXPECT_NEAR(s.slope_beta_on_gamma, 1.0, 1e-12);
  EXPECT_NEAR(s.sd_delta, 0.0, 1e-12);
  EXPECT_NEAR(s.r0_max, 0.19 / 0.05, 1e-12);
  EXPECT_NEAR(s.r0_min, 0.23 / 0.09, 1e-12);
}
