#pragma once

#include <Eigen/Core>
#include <iosfwd>

#include "sirid/error.hpp"

namespace sirid {

/// Transmission and recovery rates, both per day. Construction enforces
/// beta > 0, gamma > 0 and a growing epidemic (delta = beta - gamma > 0).
class SirParams {
 public:
  SirParams(double beta, double gamma);

  double beta() const noexcept { return beta_; }
  double gamma() const noexcept { return gamma_; }
  double delta() const noexcept { return beta_ - gamma_; }
  double r0() const noexcept { return beta_ / gamma_; }
  Eigen::Vector2d as_vector() const { return {beta_, gamma_}; }

  friend bool operator==(const SirParams&, const SirParams&) = default;

 private:
  double beta_;
  double gamma_;
};

/// Starting proportions (s0, i0) and population size N. The removed share
/// is implicit: 1 - s0 - i0.
class InitialCondition {
 public:
  InitialCondition(double s0, double i0, double population);

  /// One infected individual: s0 = 1 - 1/N, i0 = 1/N.
  static InitialCondition from_population(double population);

  double s0() const noexcept { return s0_; }
  double i0() const noexcept { return i0_; }
  double population() const noexcept { return population_; }
  double removed0() const noexcept { return 1.0 - s0_ - i0_; }

  friend bool operator==(const InitialCondition&, const InitialCondition&) = default;

 private:
  double s0_;
  double i0_;
  double population_;
};

template <typename Scalar>
using State2 = Eigen::Matrix<Scalar, 2, 1>;

/// Right-hand side of the SIR system in (s, i).
template <typename Scalar>
State2<Scalar> sir_rhs(const Scalar& beta, const Scalar& gamma, const State2<Scalar>& x) {
  const Scalar flow = beta * x(0) * x(1);
  return State2<Scalar>(-flow, flow - gamma * x(1));
}

/// One classical fourth-order Runge-Kutta step of size h for y' = f(y).
template <typename Rhs, typename State>
State rk4_step(const Rhs& f, const State& y, double h) {
  const State k1 = f(y);
  const State k2 = f(State(y + (0.5 * h) * k1));
  const State k3 = f(State(y + (0.5 * h) * k2));
  const State k4 = f(State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 step whose update is added with Kahan compensation; `carry` holds the
/// low-order bits lost so far. Keeps tiny late-epidemic increments that a
/// plain update would round away.
template <typename Rhs, typename State>
void rk4_step_compensated(const Rhs& f, State& y, State& carry, double h) {
  const State k1 = f(y);
  const State k2 = f(State(y + (0.5 * h) * k1));
  const State k3 = f(State(y + (0.5 * h) * k2));
  const State k4 = f(State(y + h * k3));
  const State increment = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - carry;
  const State next = y + increment;
  carry = (next - y) - increment;
  y = next;
}

enum class TrajectoryKind { exact, linearized };

/// Day-sampled (s, i) path. Exact trajectories also keep the RK4 substep
/// grid, which peak location and interpolation use. The share infected
/// since t = 0, s0 - s, is stored separately: with s close to 1 it carries
/// digits that s itself cannot.
class Trajectory {
 public:
  const Eigen::VectorXd& times() const noexcept { return times_; }
  const Eigen::VectorXd& s() const noexcept { return s_; }
  const Eigen::VectorXd& i() const noexcept { return i_; }
  Eigen::VectorXd r() const { return Eigen::VectorXd::Ones(s_.size()) - s_ - i_; }
  const Eigen::VectorXd& cumulative() const noexcept { return cumulative_; }

  int horizon() const noexcept { return static_cast<int>(s_.size()) - 1; }
  int steps_per_day() const noexcept { return steps_per_day_; }
  const SirParams& params() const noexcept { return params_; }
  const InitialCondition& init() const noexcept { return init_; }
  TrajectoryKind kind() const noexcept { return kind_; }

  const Eigen::VectorXd& fine_s() const noexcept { return fine_s_; }
  const Eigen::VectorXd& fine_i() const noexcept { return fine_i_; }
  double fine_step() const noexcept { return 1.0 / steps_per_day_; }

  /// Linear interpolation on the substep grid; t in [0, horizon].
  double s_at(double t) const;
  double i_at(double t) const;

 private:
  Trajectory(SirParams params, InitialCondition init, TrajectoryKind kind, int steps_per_day)
      : params_(params), init_(init), kind_(kind), steps_per_day_(steps_per_day) {}

  friend Trajectory integrate_exact(const SirParams&, const InitialCondition&, int, int);
  friend Trajectory integrate_linearized(const SirParams&, const InitialCondition&, int);

  SirParams params_;
  InitialCondition init_;
  TrajectoryKind kind_;
  int steps_per_day_;
  Eigen::VectorXd times_, s_, i_, cumulative_;
  Eigen::VectorXd fine_s_, fine_i_;
};

struct EpidemicSummary {
  double peak_time;                        // days
  double attack_fraction_at_peak_plus_10;  // 1 - s(t* + 10)
  int duration;                            // first whole day after t* with N i < 10
};

inline constexpr int kDefaultStepsPerDay = 50;

/// Right-hand side in (s, i, w) where w' = beta s i accumulates new
/// infections. Every RK4 stage feeds w the negated increments of s, so
/// w = s0 - s holds up to rounding while each keeps its own precision.
inline Eigen::Vector3d sir_rhs_tracked(double beta, double gamma, const Eigen::Vector3d& x) {
  const double flow = beta * x(0) * x(1);
  return {-flow, flow - gamma * x(1), flow};
}

/// Fixed-step RK4 on the nonlinear system, sampled at days 0..horizon.
Trajectory integrate_exact(const SirParams& params, const InitialCondition& init, int horizon,
                           int steps_per_day = kDefaultStepsPerDay);

/// Closed form of the s = 1 linearization: (s0 - (beta/delta)(e^{delta t} - 1) i0, e^{delta t} i0).
Trajectory integrate_linearized(const SirParams& params, const InitialCondition& init, int horizon);

/// Expected new infections per day, Delta_t = N (s_{t-1} - s_t) for t = 1..horizon
/// (entry k holds Delta_{k+1}).
Eigen::VectorXd incidence(const Trajectory& traj);

/// Time of maximal i located on the substep grid and refined by a quadratic
/// through the three bracketing samples.
double peak_time(const Trajectory& traj);

EpidemicSummary epidemic_summary(const Trajectory& traj);

/// Integrates with a horizon grown until the summary is defined.
EpidemicSummary summarize_epidemic(const SirParams& params, const InitialCondition& init,
                                   int steps_per_day = kDefaultStepsPerDay);

/// Peak time with the horizon grown until the peak is bracketed.
double find_peak_time(const SirParams& params, const InitialCondition& init,
                      int steps_per_day = kDefaultStepsPerDay);

/// CSV with header t,s,i,r; 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// CSV with header t,delta.
void write_incidence_csv(std::ostream& out, const Eigen::VectorXd& incidence);

}  // namespace sirid
