#include "sirid/perturb.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "sirid/csv.hpp"
#include "sirid/parallel.hpp"

namespace sirid {

using std::numbers::pi;
using std::numbers::sqrt2;

Perturbation::Perturbation(SirParams base, double epsilon, double omega)
    : base_(base), epsilon_(epsilon), omega_(omega) {
  require(std::isfinite(epsilon) && epsilon >= 0.0, ErrorKind::invalid_argument,
          "Perturbation: epsilon must be nonnegative");
  require(epsilon < base.delta(), ErrorKind::perturbation_too_large,
          "Perturbation: epsilon must be smaller than delta = " + std::to_string(base.delta()));
  require(std::isfinite(omega), ErrorKind::invalid_argument, "Perturbation: omega must be finite");
}

double Perturbation::direction_factor() const { return std::cos(omega_) - std::sin(omega_); }
double Perturbation::beta_eps() const { return base_.beta() + epsilon_ * std::cos(omega_); }
double Perturbation::gamma_eps() const { return base_.gamma() + epsilon_ * std::sin(omega_); }

std::array<ReferenceConfig, 16> reference_grid() {
  constexpr std::array<std::array<double, 3>, 4> rows{
      {{0.21, 0.14, 0.03}, {0.21, 0.07, 0.03}, {0.42, 0.07, 0.06}, {1.68, 0.14, 0.1}}};
  constexpr std::array<double, 4> populations{1e4, 1e5, 1e6, 1e7};
  std::array<ReferenceConfig, 16> grid{};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < populations.size(); ++c)
      grid[r * 4 + c] = {rows[r][0], rows[r][1], rows[r][2], populations[c]};
  return grid;
}

Eigen::VectorXd equally_spaced_angles(int count) {
  require(count >= 1, ErrorKind::invalid_argument, "equally_spaced_angles: count must be >= 1");
  Eigen::VectorXd omegas(count);
  for (int k = 0; k < count; ++k) omegas(k) = 2.0 * pi * k / count;
  return omegas;
}

Eigen::VectorXd error_fit_angles() {
  constexpr int per_window = 25;
  Eigen::VectorXd omegas(2 * per_window);
  for (int k = 0; k < per_window; ++k) {
    const double offset = -pi / 12.0 + k * (pi / 6.0) / per_window;
    omegas(k) = pi / 4.0 + offset;
    omegas(per_window + k) = 5.0 * pi / 4.0 + offset;
  }
  return omegas;
}

double lower_bound(const SirParams& base, const InitialCondition& init, double epsilon, double t) {
  require(epsilon >= 0.0, ErrorKind::invalid_argument, "lower_bound: epsilon must be nonnegative");
  require(epsilon < base.delta(), ErrorKind::perturbation_too_large,
          "lower_bound: epsilon must be smaller than delta");
  require(t >= 0.0, ErrorKind::invalid_argument, "lower_bound: t must be nonnegative");
  const double delta = base.delta();
  return epsilon / (delta * sqrt2) * std::expm1(delta * t) * init.i0();
}

std::vector<SeparationCurve> separation_sweep(const SirParams& base, const InitialCondition& init,
                                              double epsilon, const Eigen::VectorXd& omegas,
                                              int horizon, const SweepOptions& options) {
  const Trajectory reference = integrate_exact(base, init, horizon, options.steps_per_day);
  std::vector<SeparationCurve> curves(static_cast<std::size_t>(omegas.size()));
  parallel_for(curves.size(), options.threads, [&](std::size_t k) {
    const double omega = omegas(static_cast<Eigen::Index>(k));
    require(omega >= 0.0 && omega < 2.0 * pi, ErrorKind::invalid_argument,
            "separation_sweep: omega must lie in [0, 2 pi)");
    try {
      const Perturbation pert(base, epsilon, omega);
      const Trajectory moved = integrate_exact(pert.perturbed(), init, horizon, options.steps_per_day);
      const Eigen::ArrayXd ds = (moved.s() - reference.s()).array();
      const Eigen::ArrayXd di = (moved.i() - reference.i()).array();
      curves[k] = {omega, reference.times(), (ds.square() + di.square()).sqrt().matrix(),
                   ds.abs().matrix()};
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " [omega = " + csv::format(omega) + "]");
    }
  });
  return curves;
}

Eigen::Vector2d linearized_difference(const InitialCondition& init, const Perturbation& pert,
                                      double t) {
  const double beta = pert.base().beta();
  const double delta = pert.base().delta();
  const double beta_eps = pert.beta_eps();
  const double delta_eps = pert.delta_eps();
  // s0 cancels, so the difference is formed without reference to 1.
  const double ds = -(beta_eps / delta_eps * std::expm1(delta_eps * t) -
                      beta / delta * std::expm1(delta * t));
  const double di = std::exp(delta * t) * std::expm1((delta_eps - delta) * t);
  return init.i0() * Eigen::Vector2d(ds, di);
}

ApproximationError approximation_error(const InitialCondition& init, const Perturbation& pert,
                                       int horizon, int steps_per_day) {
  require(horizon >= 1, ErrorKind::insufficient_data, "approximation_error: horizon must be >= 1");
  const Trajectory base = integrate_exact(pert.base(), init, horizon, steps_per_day);
  const Trajectory moved = integrate_exact(pert.perturbed(), init, horizon, steps_per_day);

  const Eigen::Index n = horizon + 1;
  ApproximationError out;
  out.times = base.times();
  out.exact_norm = ((moved.s() - base.s()).array().square() + (moved.i() - base.i()).array().square())
                       .sqrt()
                       .matrix();
  out.linearized_norm.resize(n);
  for (Eigen::Index t = 0; t < n; ++t)
    out.linearized_norm(t) = linearized_difference(init, pert, static_cast<double>(t)).norm();
  out.error = out.exact_norm - out.linearized_norm;
  out.relative_log_error.resize(n);
  out.present.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const bool ok = out.exact_norm(t) > 0.0 && out.linearized_norm(t) > 0.0 && out.error(t) != 0.0;
    out.present(t) = ok;
    out.relative_log_error(t) = ok ? std::log(std::abs(out.error(t))) - std::log(out.exact_norm(t))
                                   : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

ErrorFit error_fit(const SirParams& base, const InitialCondition& init, double epsilon,
                   int horizon, const SweepOptions& options) {
  const double t_star = find_peak_time(base, init, options.steps_per_day);
  const int last_day = static_cast<int>(std::floor(0.95 * t_star));
  if (horizon == 0) horizon = std::max(last_day, 1);
  require(horizon >= last_day, ErrorKind::insufficient_data,
          "error_fit: horizon " + std::to_string(horizon) + " ends before 0.95 t* = " +
              std::to_string(0.95 * t_star));

  ErrorFit fit{};
  fit.peak_time = t_star;
  fit.omegas = error_fit_angles();
  fit.slopes.resize(fit.omegas.size());
  fit.intercepts.resize(fit.omegas.size());

  parallel_for(static_cast<std::size_t>(fit.omegas.size()), options.threads, [&](std::size_t k) {
    const auto idx = static_cast<Eigen::Index>(k);
    const Perturbation pert(base, epsilon, fit.omegas(idx));
    const ApproximationError err = approximation_error(init, pert, horizon, options.steps_per_day);
    std::vector<Eigen::Index> days;
    for (Eigen::Index t = 1; t <= last_day; ++t)
      if (err.present(t)) days.push_back(t);
    require(days.size() >= 5, ErrorKind::fit_degenerate,
            "error_fit: fewer than 5 usable points for omega = " + csv::format(fit.omegas(idx)));
    Eigen::MatrixXd design(static_cast<Eigen::Index>(days.size()), 2);
    Eigen::VectorXd target(static_cast<Eigen::Index>(days.size()));
    for (std::size_t j = 0; j < days.size(); ++j) {
      const auto row = static_cast<Eigen::Index>(j);
      design(row, 0) = static_cast<double>(days[j]);
      design(row, 1) = 1.0;
      target(row) = err.relative_log_error(days[j]);
    }
    const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(target);
    fit.slopes(idx) = coef(0);
    fit.intercepts(idx) = coef(1);
  });

  fit.slope = fit.slopes.mean();
  fit.intercept = fit.intercepts.mean();
  fit.crossing_time = fit.slope > 0.0 ? -fit.intercept / fit.slope
                                      : std::numeric_limits<double>::infinity();
  fit.percent_of_peak = 100.0 * fit.crossing_time / t_star;
  return fit;
}

double theoretical_error_bound(const InitialCondition& init, const Perturbation& pert, double t) {
  require(t >= 0.0, ErrorKind::invalid_argument, "theoretical_error_bound: t must be nonnegative");
  const double beta = pert.base().beta(), gamma = pert.base().gamma(), delta = pert.base().delta();
  const double beta_eps = pert.beta_eps(), gamma_eps = pert.gamma_eps(), delta_eps = pert.delta_eps();
  require(delta_eps > 0.0, ErrorKind::perturbation_too_large,
          "theoretical_error_bound: perturbed delta must be positive");
  const double moved = std::sqrt(2.0 * beta_eps * beta_eps + gamma_eps * gamma_eps) / delta_eps *
                       std::expm1(delta_eps * t);
  const double fixed = std::sqrt(2.0 * beta * beta + gamma * gamma) / delta * std::expm1(delta * t);
  return (moved + fixed) * init.i0();
}

void write_sweep_csv(std::ostream& out, const std::vector<SeparationCurve>& curves) {
  out << "omega,t,distance,s_distance\n";
  for (const auto& c : curves)
    for (Eigen::Index k = 0; k < c.times.size(); ++k)
      out << csv::format(c.omega) << ',' << csv::format(c.times(k)) << ','
          << csv::format(c.distance(k)) << ',' << csv::format(c.s_distance(k)) << '\n';
}

void write_error_fit_csv(std::ostream& out, const ErrorFit& fit) {
  out << "omega,slope,intercept\n";
  for (Eigen::Index k = 0; k < fit.omegas.size(); ++k)
    out << csv::format(fit.omegas(k)) << ',' << csv::format(fit.slopes(k)) << ','
        << csv::format(fit.intercepts(k)) << '\n';
}

}  // namespace sirid
