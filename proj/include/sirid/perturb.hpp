#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <vector>

#include "sirid/core.hpp"

namespace sirid {

/// A point theta + epsilon (cos omega, sin omega) on the circle of radius
/// epsilon around `base`. Requires 0 <= epsilon < base.delta(), which keeps
/// the perturbed growth rate positive for every direction.
class Perturbation {
 public:
  Perturbation(SirParams base, double epsilon, double omega);

  const SirParams& base() const noexcept { return base_; }
  double epsilon() const noexcept { return epsilon_; }
  double omega() const noexcept { return omega_; }

  /// cos(omega) - sin(omega)
  double direction_factor() const;
  double beta_eps() const;
  double gamma_eps() const;
  double delta_eps() const { return base_.delta() + epsilon_ * direction_factor(); }
  SirParams perturbed() const { return {beta_eps(), gamma_eps()}; }

 private:
  SirParams base_;
  double epsilon_;
  double omega_;
};

struct SeparationCurve {
  double omega;
  Eigen::VectorXd times;
  Eigen::VectorXd distance;    // ||phi_t(theta_eps) - phi_t(theta)||
  Eigen::VectorXd s_distance;  // |s_t(theta_eps) - s_t(theta)|
};

/// Per-day split of the exact separation into its linearized part and the
/// remainder E_t. `relative_log_error` is NaN wherever `present` is false.
struct ApproximationError {
  Eigen::VectorXd times;
  Eigen::VectorXd exact_norm;
  Eigen::VectorXd linearized_norm;
  Eigen::VectorXd error;
  Eigen::VectorXd relative_log_error;
  Eigen::Array<bool, Eigen::Dynamic, 1> present;
};

struct ErrorFit {
  double slope;
  double intercept;
  double crossing_time;
  double percent_of_peak;
  double peak_time;
  Eigen::VectorXd omegas;
  Eigen::VectorXd slopes;
  Eigen::VectorXd intercepts;
};

struct SweepOptions {
  int steps_per_day = kDefaultStepsPerDay;
  int threads = 1;
};

struct ReferenceConfig {
  double beta;
  double gamma;
  double epsilon;
  double population;
};

/// Four (beta, gamma, epsilon) rows times N in {1e4, 1e5, 1e6, 1e7}, row-major.
std::array<ReferenceConfig, 16> reference_grid();

/// `count` equally spaced angles k * 2 pi / count.
Eigen::VectorXd equally_spaced_angles(int count);

/// 25 angles in [pi/4 - pi/12, pi/4 + pi/12) followed by 25 in the same
/// window around 5 pi/4.
Eigen::VectorXd error_fit_angles();

/// (epsilon / (delta sqrt 2)) (e^{delta t} - 1) i0
double lower_bound(const SirParams& base, const InitialCondition& init, double epsilon, double t);

std::vector<SeparationCurve> separation_sweep(const SirParams& base, const InitialCondition& init,
                                              double epsilon, const Eigen::VectorXd& omegas,
                                              int horizon, const SweepOptions& options = {});

/// phi~_t(theta_eps) - phi~_t(theta) from the closed-form linearized flow.
Eigen::Vector2d linearized_difference(const InitialCondition& init, const Perturbation& pert,
                                      double t);

ApproximationError approximation_error(const InitialCondition& init, const Perturbation& pert,
                                       int horizon, int steps_per_day = kDefaultStepsPerDay);

/// Least-squares line through the log relative error of each error-fit angle
/// over whole days [1, 0.95 t*], averaged over angles. `horizon` = 0 sizes
/// the integration from the peak time.
ErrorFit error_fit(const SirParams& base, const InitialCondition& init, double epsilon,
                   int horizon = 0, const SweepOptions& options = {});

/// Upper bound on |E_t| from integrating the linearization defect.
double theoretical_error_bound(const InitialCondition& init, const Perturbation& pert, double t);

/// omega,t,distance,s_distance
void write_sweep_csv(std::ostream& out, const std::vector<SeparationCurve>& curves);
/// omega,slope,intercept
void write_error_fit_csv(std::ostream& out, const ErrorFit& fit);

}  // namespace sirid
