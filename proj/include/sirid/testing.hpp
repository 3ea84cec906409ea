#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sirid/perturb.hpp"
#include "sirid/simulate.hpp"

namespace sirid {

/// Simple-vs-simple test H0: theta = theta_0 against H1: theta = theta_eps(omega),
/// observed over days 1..T with Y_t = p Delta_t + sigma_t Z_t.
/// Construction requires epsilon > 0, alpha in (0, 1), p in (0, 1] and
/// T strictly before the peak of theta_0.
class TestSpec {
 public:
  TestSpec(Perturbation pert, double alpha, int days, double p, NoiseModel noise,
           InitialCondition init, int steps_per_day = kDefaultStepsPerDay);

  const SirParams& null_params() const noexcept { return pert_.base(); }
  const Perturbation& pert() const noexcept { return pert_; }
  double alpha() const noexcept { return alpha_; }
  int days() const noexcept { return days_; }
  double p() const noexcept { return p_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  const InitialCondition& init() const noexcept { return init_; }
  int steps_per_day() const noexcept { return steps_per_day_; }
  double null_peak_time() const noexcept { return peak_time_; }

  /// Same null, horizon and noise; only epsilon/omega change.
  TestSpec with_direction(double epsilon, double omega) const;
  TestSpec with_noise(NoiseModel noise) const;

 private:
  TestSpec(Perturbation pert, double alpha, int days, double p, NoiseModel noise,
           InitialCondition init, int steps_per_day, double peak_time);

  Perturbation pert_;
  double alpha_;
  int days_;
  double p_;
  NoiseModel noise_;
  InitialCondition init_;
  int steps_per_day_;
  double peak_time_;
};

struct LrtDecision {
  double log_lr;
  double threshold;  // log eta
  bool reject;
};

/// Exact incidences of both hypotheses over days 1..T with the null sigma_t.
struct TestSignal {
  Eigen::VectorXd null_incidence;
  Eigen::VectorXd alt_incidence;
  Eigen::VectorXd sigma_t;
  double v_t;  // sum p^2 (Delta^eps - Delta^0)^2 / sigma_t^2
};

TestSignal test_signal(const TestSpec& spec);

/// log eta = -sqrt(V_T) Phi^{-1}(alpha) - V_T / 2.
double lrt_threshold(const TestSpec& spec);
double lrt_threshold(double v_t, double alpha);

LrtDecision lrt_decide(const ObservationSeries& obs, const TestSpec& spec);
LrtDecision lrt_decide(const Eigen::VectorXd& y, const TestSignal& signal, double p, double alpha);

/// 1 - Phi(Phi^{-1}(alpha) + sqrt(V_T)).
double type2_exact(const TestSpec& spec);

enum class ApproxVariant { first, second };

/// Closed form from linearized incidences. Noise driven by i_t uses the
/// pre-peak substitute i_t = e^{delta t} i0. Requires T <= 0.8 t*.
double type2_approx(const TestSpec& spec, ApproxVariant variant);

struct WorstDirection {
  double omega;
  double type2;
};

/// Argmax of type2_approx(first) over the angles.
WorstDirection worst_case_direction(const TestSpec& spec, const Eigen::VectorXd& omegas);
WorstDirection worst_case_direction(const TestSpec& spec, int count = 150);

/// Smallest epsilon reaching the target type II error in the Case 2 closed
/// form at omega = pi/4.
double epsilon_for_power(double target_type2, double alpha, double sigma, double p, int days,
                         double delta);

struct GammaTestPower {
  double type2;
  double epsilon;  // |epsilon_hat| sqrt 2
  double omega;    // pi/4 for epsilon_hat > 0, 5 pi/4 otherwise
};

/// Test of gamma_0 against gamma_0 + epsilon_hat with delta held fixed.
GammaTestPower gamma_test_power(double epsilon_hat, double alpha, double sigma, double p,
                                int days);

struct EmpiricalRate {
  double rate;
  double standard_error;  // binomial
};

/// Fraction of data sets simulated under theta_eps that the LRT fails to reject.
EmpiricalRate empirical_type2(const TestSpec& spec, int replicates, std::uint64_t seed,
                              int threads = 1);
/// Fraction of data sets simulated under theta_0 that the LRT rejects.
EmpiricalRate empirical_type1(const TestSpec& spec, int replicates, std::uint64_t seed,
                              int threads = 1);

struct PowerResult {
  double type2_exact;
  double type2_approx1;
  double type2_approx2;
  std::optional<EmpiricalRate> type2_empirical;
  double v_t;
};

/// All type II error estimates at one point; empirical only if replicates > 0.
PowerResult power(const TestSpec& spec, int replicates = 0, std::uint64_t seed = 0,
                  int threads = 1);

struct PowerRow {
  double omega;
  double epsilon;
  double sigma;
  PowerResult result;
};

/// CSV with header omega,epsilon,sigma,type2_exact,type2_approx1,type2_approx2,type2_empirical,stderr.
void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows);

}  // namespace sirid
