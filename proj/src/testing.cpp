#include "sirid/testing.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "sirid/csv.hpp"
#include "sirid/normal.hpp"
#include "sirid/parallel.hpp"

namespace sirid {

namespace {

using std::numbers::pi;

void check_level(double alpha, const char* who) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::invalid_argument,
          std::string(who) + ": alpha must lie in (0, 1)");
}

// 1 - Phi(Phi^{-1}(alpha) + shift), without cancellation for small results.
double miss_probability(double alpha, double shift) {
  return normal_cdf(-(normal_quantile(alpha) + shift));
}

}  // namespace

TestSpec::TestSpec(Perturbation pert, double alpha, int days, double p, NoiseModel noise,
                   InitialCondition init, int steps_per_day)
    : TestSpec(pert, alpha, days, p, std::move(noise), init, steps_per_day,
               find_peak_time(pert.base(), init, steps_per_day)) {}

TestSpec::TestSpec(Perturbation pert, double alpha, int days, double p, NoiseModel noise,
                   InitialCondition init, int steps_per_day, double peak_time)
    : pert_(pert),
      alpha_(alpha),
      days_(days),
      p_(p),
      noise_(std::move(noise)),
      init_(init),
      steps_per_day_(steps_per_day),
      peak_time_(peak_time) {
  require(pert.epsilon() > 0.0, ErrorKind::invalid_argument,
          "TestSpec: epsilon must be positive, otherwise both hypotheses coincide");
  check_level(alpha, "TestSpec");
  require(p > 0.0 && p <= 1.0, ErrorKind::invalid_argument,
          "TestSpec: reporting rate must lie in (0, 1]");
  require(days >= 1, ErrorKind::invalid_argument, "TestSpec: T must be >= 1");
  require(steps_per_day >= 1, ErrorKind::invalid_argument,
          "TestSpec: steps_per_day must be >= 1");
  require(days < peak_time, ErrorKind::invalid_argument,
          "TestSpec: T = " + std::to_string(days) + " is not before the null peak at t = " +
              std::to_string(peak_time));
}

TestSpec TestSpec::with_direction(double epsilon, double omega) const {
  return TestSpec(Perturbation(pert_.base(), epsilon, omega), alpha_, days_, p_, noise_, init_,
                  steps_per_day_, peak_time_);
}

TestSpec TestSpec::with_noise(NoiseModel noise) const {
  return TestSpec(pert_, alpha_, days_, p_, std::move(noise), init_, steps_per_day_, peak_time_);
}

TestSignal test_signal(const TestSpec& spec) {
  const int days = spec.days();
  const Trajectory null_traj =
      integrate_exact(spec.null_params(), spec.init(), days, spec.steps_per_day());
  const Trajectory alt_traj =
      integrate_exact(spec.pert().perturbed(), spec.init(), days, spec.steps_per_day());
  TestSignal out{incidence(null_traj), incidence(alt_traj),
                 sigma_sequence(spec.noise(), null_traj, days), 0.0};
  for (int t = 0; t < days; ++t) {
    const double sd = out.sigma_t(t);
    if (!(sd > 0.0)) {
      fail(ErrorKind::degenerate_variance,
           "test_signal: sigma_t is not positive on day " + std::to_string(t + 1));
    }
    const double diff = spec.p() * (out.alt_incidence(t) - out.null_incidence(t)) / sd;
    out.v_t += diff * diff;
  }
  return out;
}

double lrt_threshold(double v_t, double alpha) {
  check_level(alpha, "lrt_threshold");
  require(v_t > 0.0, ErrorKind::indistinguishable_hypotheses,
          "lrt_threshold: V_T = 0, the hypotheses give identical incidences");
  return -std::sqrt(v_t) * normal_quantile(alpha) - 0.5 * v_t;
}

double lrt_threshold(const TestSpec& spec) {
  return lrt_threshold(test_signal(spec).v_t, spec.alpha());
}

LrtDecision lrt_decide(const Eigen::VectorXd& y, const TestSignal& signal, double p,
                       double alpha) {
  const auto days = signal.sigma_t.size();
  require(y.size() >= days, ErrorKind::insufficient_data,
          "lrt_decide: " + std::to_string(y.size()) + " observations for a horizon of " +
              std::to_string(days));
  double log_lr = 0.0;
  for (Eigen::Index t = 0; t < days; ++t) {
    const double r0 = y(t) - p * signal.null_incidence(t);
    const double r1 = y(t) - p * signal.alt_incidence(t);
    log_lr += (r0 * r0 - r1 * r1) / (2.0 * signal.sigma_t(t) * signal.sigma_t(t));
  }
  const double threshold = lrt_threshold(signal.v_t, alpha);
  return {log_lr, threshold, log_lr >= threshold};
}

LrtDecision lrt_decide(const ObservationSeries& obs, const TestSpec& spec) {
  return lrt_decide(obs.values, test_signal(spec), spec.p(), spec.alpha());
}

double type2_exact(const TestSpec& spec) {
  const double v = test_signal(spec).v_t;
  lrt_threshold(v, spec.alpha());
  return miss_probability(spec.alpha(), std::sqrt(v));
}

double type2_approx(const TestSpec& spec, ApproxVariant variant) {
  require(spec.days() <= 0.8 * spec.null_peak_time(), ErrorKind::invalid_argument,
          "type2_approx: T must not exceed 0.8 t* for the linearized incidences");
  const Perturbation& pert = spec.pert();
  const double beta = spec.null_params().beta();
  const double delta = spec.null_params().delta();
  const double delta_eps = pert.delta_eps();
  require(delta_eps > 0.0, ErrorKind::perturbation_too_large,
          "type2_approx: perturbed growth rate is not positive");
  const double eps = pert.epsilon();
  const double f = pert.direction_factor();
  // beta (e^{-delta} - 1) / (-delta)
  const double first_null = beta * -std::expm1(-delta) / delta;
  const double first_alt = pert.beta_eps() * -std::expm1(-delta_eps) / delta_eps;
  const double second_alt = beta + eps * std::cos(pert.omega());

  const int days = spec.days();
  const double n = spec.init().population();
  const double i0 = spec.init().i0();
  Eigen::VectorXd pre_peak_i(days);
  for (int t = 1; t <= days; ++t) pre_peak_i(t - 1) = std::exp(delta * t) * i0;
  const Eigen::VectorXd sd = sigma_sequence(spec.noise(), n, pre_peak_i);

  double sum = 0.0;
  for (int t = 1; t <= days; ++t) {
    require(sd(t - 1) > 0.0, ErrorKind::degenerate_variance,
            "type2_approx: sigma_t is not positive on day " + std::to_string(t));
    const double tilt = std::exp(eps * t * f);
    const double bracket = variant == ApproxVariant::first ? first_alt * tilt - first_null
                                                           : second_alt * tilt - beta;
    const double w = std::exp(delta * t) / sd(t - 1);
    sum += bracket * bracket * w * w;
  }
  return miss_probability(spec.alpha(), spec.p() * n * i0 * std::sqrt(sum));
}

WorstDirection worst_case_direction(const TestSpec& spec, const Eigen::VectorXd& omegas) {
  require(omegas.size() >= 1, ErrorKind::invalid_argument,
          "worst_case_direction: empty angle grid");
  WorstDirection best{omegas(0), -1.0};
  for (Eigen::Index k = 0; k < omegas.size(); ++k) {
    const double e2 =
        type2_approx(spec.with_direction(spec.pert().epsilon(), omegas(k)), ApproxVariant::first);
    if (e2 > best.type2) best = {omegas(k), e2};
  }
  return best;
}

WorstDirection worst_case_direction(const TestSpec& spec, int count) {
  return worst_case_direction(spec, equally_spaced_angles(count));
}

double epsilon_for_power(double target_type2, double alpha, double sigma, double p, int days,
                         double delta) {
  check_level(alpha, "epsilon_for_power");
  require(target_type2 > 0.0 && target_type2 < 1.0, ErrorKind::invalid_argument,
          "epsilon_for_power: target type II error must lie in (0, 1)");
  require(sigma > 0.0 && p > 0.0 && p <= 1.0 && days >= 1 && delta > 0.0,
          ErrorKind::invalid_argument,
          "epsilon_for_power: need sigma > 0, p in (0, 1], T >= 1 and delta > 0");
  require(target_type2 < 1.0 - alpha, ErrorKind::no_detectable_perturbation,
          "epsilon_for_power: a type II error of at least 1 - alpha needs no perturbation");
  const double z = normal_quantile(1.0 - target_type2) - normal_quantile(alpha);
  // delta e^delta / (e^delta - 1) written as delta / (1 - e^{-delta})
  return z * sigma * (delta / -std::expm1(-delta)) * std::numbers::sqrt2 /
         (p * std::sqrt(static_cast<double>(days)));
}

GammaTestPower gamma_test_power(double epsilon_hat, double alpha, double sigma, double p,
                                int days) {
  check_level(alpha, "gamma_test_power");
  require(epsilon_hat != 0.0, ErrorKind::indistinguishable_hypotheses,
          "gamma_test_power: epsilon_hat = 0 leaves both hypotheses equal");
  require(std::isfinite(epsilon_hat), ErrorKind::invalid_argument,
          "gamma_test_power: epsilon_hat must be finite");
  require(sigma > 0.0 && p > 0.0 && p <= 1.0 && days >= 1, ErrorKind::invalid_argument,
          "gamma_test_power: need sigma > 0, p in (0, 1] and T >= 1");
  const double mag = std::abs(epsilon_hat);
  return {miss_probability(alpha, p * mag * std::sqrt(static_cast<double>(days)) / sigma),
          mag * std::numbers::sqrt2, epsilon_hat > 0.0 ? pi / 4.0 : 5.0 * pi / 4.0};
}

namespace {

EmpiricalRate empirical_rate(const TestSpec& spec, int replicates, std::uint64_t seed,
                             int threads, bool under_alternative) {
  require(replicates >= 100, ErrorKind::invalid_argument,
          "empirical power: at least 100 replicates are required");
  const TestSignal signal = test_signal(spec);
  lrt_threshold(signal.v_t, spec.alpha());
  const Trajectory truth =
      integrate_exact(under_alternative ? spec.pert().perturbed() : spec.null_params(),
                      spec.init(), spec.days(), spec.steps_per_day());
  const NoiseModel noise = NoiseModel::known(signal.sigma_t);

  std::vector<char> hits(static_cast<std::size_t>(replicates), 0);
  parallel_for(hits.size(), threads, [&](std::size_t r) {
    const ObservationSeries obs =
        observe(truth, noise, spec.p(), spec.days(), rng::derive_seed(seed, r));
    const bool reject = lrt_decide(obs.values, signal, spec.p(), spec.alpha()).reject;
    hits[r] = under_alternative ? !reject : reject;
  });
  double count = 0.0;
  for (char h : hits) count += h;
  const double rate = count / replicates;
  return {rate, std::sqrt(rate * (1.0 - rate) / replicates)};
}

}  // namespace

EmpiricalRate empirical_type2(const TestSpec& spec, int replicates, std::uint64_t seed,
                              int threads) {
  return empirical_rate(spec, replicates, seed, threads, true);
}

EmpiricalRate empirical_type1(const TestSpec& spec, int replicates, std::uint64_t seed,
                              int threads) {
  return empirical_rate(spec, replicates, seed, threads, false);
}

PowerResult power(const TestSpec& spec, int replicates, std::uint64_t seed, int threads) {
  const TestSignal signal = test_signal(spec);
  lrt_threshold(signal.v_t, spec.alpha());
  PowerResult out{miss_probability(spec.alpha(), std::sqrt(signal.v_t)),
                  type2_approx(spec, ApproxVariant::first),
                  type2_approx(spec, ApproxVariant::second), std::nullopt, signal.v_t};
  if (replicates > 0) out.type2_empirical = empirical_type2(spec, replicates, seed, threads);
  return out;
}

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows) {
  out << "omega,epsilon,sigma,type2_exact,type2_approx1,type2_approx2,type2_empirical,stderr\n";
  for (const PowerRow& row : rows) {
    const PowerResult& r = row.result;
    out << csv::format(row.omega) << ',' << csv::format(row.epsilon) << ','
        << csv::format(row.sigma) << ',' << csv::format(r.type2_exact) << ','
        << csv::format(r.type2_approx1) << ',' << csv::format(r.type2_approx2) << ',';
    if (r.type2_empirical) {
      out << csv::format(r.type2_empirical->rate) << ','
          << csv::format(r.type2_empirical->standard_error);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

}  // namespace sirid
