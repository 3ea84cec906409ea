#include "sirid/core.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "sirid/csv.hpp"

namespace sirid {

SirParams::SirParams(double beta, double gamma) : beta_(beta), gamma_(gamma) {
  require(std::isfinite(beta) && beta > 0.0, ErrorKind::invalid_argument,
          "SirParams: beta must be positive and finite");
  require(std::isfinite(gamma) && gamma > 0.0, ErrorKind::invalid_argument,
          "SirParams: gamma must be positive and finite");
  require(beta > gamma, ErrorKind::degenerate_parameter,
          "SirParams: delta = beta - gamma must be positive (R0 > 1)");
}

InitialCondition::InitialCondition(double s0, double i0, double population)
    : s0_(s0), i0_(i0), population_(population) {
  require(s0 >= 0.0 && s0 <= 1.0 && i0 >= 0.0 && i0 <= 1.0, ErrorKind::invalid_argument,
          "InitialCondition: proportions must lie in [0, 1]");
  require(s0 + i0 <= 1.0 + 1e-15, ErrorKind::invalid_argument,
          "InitialCondition: s0 + i0 must not exceed 1");
  require(std::isfinite(population) && population >= 1.0, ErrorKind::invalid_argument,
          "InitialCondition: population must be at least 1");
}

InitialCondition InitialCondition::from_population(double population) {
  require(std::isfinite(population) && population >= 1.0, ErrorKind::invalid_argument,
          "InitialCondition: population must be at least 1");
  return {1.0 - 1.0 / population, 1.0 / population, population};
}

namespace {

double interpolate(const Eigen::VectorXd& fine, double step, double t) {
  const double pos = t / step;
  const auto last = fine.size() - 1;
  require(pos >= -1e-9 && pos <= static_cast<double>(last) + 1e-9, ErrorKind::insufficient_data,
          "trajectory queried outside its horizon at t = " + std::to_string(t));
  const auto k = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), 0, last - 1);
  const double w = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
  return (1.0 - w) * fine(k) + w * fine(k + 1);
}

}  // namespace

double Trajectory::s_at(double t) const { return interpolate(fine_s_, fine_step(), t); }
double Trajectory::i_at(double t) const { return interpolate(fine_i_, fine_step(), t); }

Trajectory integrate_exact(const SirParams& params, const InitialCondition& init, int horizon,
                           int steps_per_day) {
  require(horizon >= 1, ErrorKind::invalid_argument, "integrate_exact: horizon must be >= 1");
  require(steps_per_day >= 1, ErrorKind::invalid_argument,
          "integrate_exact: steps_per_day must be >= 1");

  Trajectory traj(params, init, TrajectoryKind::exact, steps_per_day);
  const Eigen::Index n_fine = static_cast<Eigen::Index>(horizon) * steps_per_day + 1;
  traj.fine_s_.resize(n_fine);
  traj.fine_i_.resize(n_fine);

  const double beta = params.beta();
  const double gamma = params.gamma();
  const auto rhs = [beta, gamma](const Eigen::Vector3d& x) {
    return sir_rhs_tracked(beta, gamma, x);
  };
  const double h = 1.0 / steps_per_day;

  Eigen::VectorXd fine_w(n_fine);
  Eigen::Vector3d x(init.s0(), init.i0(), 0.0);
  Eigen::Vector3d carry = Eigen::Vector3d::Zero();
  fine_w(0) = 0.0;
  traj.fine_s_(0) = x(0);
  traj.fine_i_(0) = x(1);
  for (Eigen::Index k = 1; k < n_fine; ++k) {
    rk4_step_compensated(rhs, x, carry, h);
    if (!x.allFinite()) {
      fail(ErrorKind::integration_failure,
           "integrate_exact: non-finite state at substep " + std::to_string(k) + " (t = " +
               std::to_string(static_cast<double>(k) * h) + ")");
    }
    traj.fine_s_(k) = x(0);
    traj.fine_i_(k) = x(1);
    fine_w(k) = x(2);
  }

  traj.times_ = Eigen::VectorXd::LinSpaced(horizon + 1, 0.0, horizon);
  traj.s_.resize(horizon + 1);
  traj.i_.resize(horizon + 1);
  traj.cumulative_.resize(horizon + 1);
  for (int d = 0; d <= horizon; ++d) {
    traj.cumulative_(d) = fine_w(static_cast<Eigen::Index>(d) * steps_per_day);
    traj.s_(d) = traj.fine_s_(static_cast<Eigen::Index>(d) * steps_per_day);
    traj.i_(d) = traj.fine_i_(static_cast<Eigen::Index>(d) * steps_per_day);
  }
  return traj;
}

Trajectory integrate_linearized(const SirParams& params, const InitialCondition& init,
                                int horizon) {
  require(horizon >= 1, ErrorKind::invalid_argument, "integrate_linearized: horizon must be >= 1");
  const double delta = params.delta();
  require(delta != 0.0, ErrorKind::degenerate_parameter, "integrate_linearized: delta is zero");

  Trajectory traj(params, init, TrajectoryKind::linearized, 1);
  traj.times_ = Eigen::VectorXd::LinSpaced(horizon + 1, 0.0, horizon);
  traj.cumulative_ = (params.beta() / delta) * init.i0() *
                     (delta * traj.times_.array()).unaryExpr([](double v) { return std::expm1(v); });
  traj.s_ = init.s0() - traj.cumulative_.array();
  traj.i_ = init.i0() * (delta * traj.times_.array()).exp();
  traj.fine_s_ = traj.s_;
  traj.fine_i_ = traj.i_;
  return traj;
}

Eigen::VectorXd incidence(const Trajectory& traj) {
  require(traj.s().size() >= 2, ErrorKind::insufficient_data,
          "incidence: trajectory needs at least two day samples");
  const auto n = traj.s().size() - 1;
  return traj.init().population() * (traj.cumulative().tail(n) - traj.cumulative().head(n));
}

double peak_time(const Trajectory& traj) {
  const Eigen::VectorXd& fi = traj.fine_i();
  require(fi.size() >= 3, ErrorKind::insufficient_data, "peak_time: trajectory too short");
  require(fi.maxCoeff() > 0.0, ErrorKind::invalid_argument,
          "peak_time: no infection present (i0 = 0)");
  Eigen::Index k = 0;
  fi.maxCoeff(&k);
  if (k == fi.size() - 1) {
    fail(ErrorKind::horizon_too_short,
         "peak_time: i still nondecreasing at the horizon (t = " +
             std::to_string(traj.horizon()) + "); integrate further");
  }
  if (k == 0) return 0.0;
  const double y0 = fi(k - 1), y1 = fi(k), y2 = fi(k + 1);
  const double curvature = y0 - 2.0 * y1 + y2;
  double offset = 0.0;
  if (curvature < 0.0) offset = std::clamp(0.5 * (y0 - y2) / curvature, -1.0, 1.0);
  return (static_cast<double>(k) + offset) * traj.fine_step();
}

EpidemicSummary epidemic_summary(const Trajectory& traj) {
  const double t_star = peak_time(traj);
  const double reference = t_star + 10.0;
  if (reference > traj.horizon()) {
    fail(ErrorKind::horizon_too_short,
         "epidemic_summary: horizon " + std::to_string(traj.horizon()) +
             " ends before peak + 10 days; extend to at least " +
             std::to_string(static_cast<int>(std::ceil(reference))));
  }
  const double n = traj.init().population();
  int duration = -1;
  for (int t = static_cast<int>(std::floor(t_star)) + 1; t <= traj.horizon(); ++t) {
    if (n * traj.i()(t) < 10.0) {
      duration = t;
      break;
    }
  }
  if (duration < 0) {
    fail(ErrorKind::horizon_too_short,
         "epidemic_summary: fewer than 10 infected never reached by day " +
             std::to_string(traj.horizon()) + "; extend the horizon (try " +
             std::to_string(2 * traj.horizon()) + ")");
  }
  return {t_star, 1.0 - traj.s_at(reference), duration};
}

namespace {

constexpr int kMaxAutoHorizon = 200000;

template <typename F>
auto with_growing_horizon(const SirParams& params, const InitialCondition& init,
                          int steps_per_day, F&& f) {
  for (int horizon = 256;; horizon *= 2) {
    try {
      return f(integrate_exact(params, init, horizon, steps_per_day));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::horizon_too_short || horizon >= kMaxAutoHorizon) throw;
    }
  }
}

}  // namespace

EpidemicSummary summarize_epidemic(const SirParams& params, const InitialCondition& init,
                                   int steps_per_day) {
  return with_growing_horizon(params, init, steps_per_day,
                              [](const Trajectory& t) { return epidemic_summary(t); });
}

double find_peak_time(const SirParams& params, const InitialCondition& init, int steps_per_day) {
  return with_growing_horizon(params, init, steps_per_day,
                              [](const Trajectory& t) { return peak_time(t); });
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,s,i,r\n";
  const Eigen::VectorXd r = traj.r();
  for (Eigen::Index k = 0; k < traj.s().size(); ++k) {
    out << csv::format(traj.times()(k)) << ',' << csv::format(traj.s()(k)) << ','
        << csv::format(traj.i()(k)) << ',' << csv::format(r(k)) << '\n';
  }
}

void write_incidence_csv(std::ostream& out, const Eigen::VectorXd& values) {
  out << "t,delta\n";
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    out << (k + 1) << ',' << csv::format(values(k)) << '\n';
  }
}

}  // namespace sirid
