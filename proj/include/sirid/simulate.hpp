#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "sirid/core.hpp"

namespace sirid {

enum class NoiseKind {
  known_sequence,  // explicit sigma_t per day
  case1,           // sigma_t = N sigma
  case2,           // sigma_t = N sigma i_t
  infection_root,  // sigma_t = sigma sqrt(N i_t), the daily-case likelihood
};

class NoiseModel {
 public:
  static NoiseModel known(Eigen::VectorXd sigma_t);
  static NoiseModel case1(double sigma);
  static NoiseModel case2(double sigma);
  static NoiseModel infection_root(double sigma);
  static NoiseModel make(NoiseKind kind, double sigma);

  NoiseKind kind() const noexcept { return kind_; }
  double sigma() const noexcept { return sigma_; }
  const Eigen::VectorXd& sigma_t() const noexcept { return sigma_t_; }
  bool depends_on_infected() const noexcept {
    return kind_ == NoiseKind::case2 || kind_ == NoiseKind::infection_root;
  }

  /// Same kind with a different scale; not defined for known sequences.
  NoiseModel with_sigma(double sigma) const;

 private:
  NoiseModel(NoiseKind kind, double sigma, Eigen::VectorXd sigma_t)
      : kind_(kind), sigma_(sigma), sigma_t_(std::move(sigma_t)) {}

  NoiseKind kind_;
  double sigma_;
  Eigen::VectorXd sigma_t_;
};

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// sigma_t for days 1..T given infected proportions i_1..i_T.
Eigen::VectorXd sigma_sequence(const NoiseModel& noise, double population,
                               const Eigen::VectorXd& infected);

/// sigma_t for days 1..T read off a day-sampled trajectory.
Eigen::VectorXd sigma_sequence(const NoiseModel& noise, const Trajectory& traj, int days);

struct ObservationSeries {
  Eigen::VectorXd values;  // Y_1..Y_T, unrounded and unclipped
  double reporting_rate;
  NoiseModel noise;
  std::uint64_t seed;

  int days() const noexcept { return static_cast<int>(values.size()); }
};

/// Y_t = p Delta_t + sigma_t Z_t, with Z_t drawn from a counter-based stream
/// keyed by (seed, t): the draw for day t never depends on iteration order.
ObservationSeries observe(const Trajectory& traj, const NoiseModel& noise, double p, int days,
                          std::uint64_t seed);

namespace rng {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane);
/// Seed of replicate `index` under a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
/// Uniform on (0, 1).
double uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane);
/// Box-Muller standard normal for (seed, counter).
double standard_normal(std::uint64_t seed, std::uint64_t counter);

}  // namespace rng

}  // namespace sirid
