#include "sirid/simulate.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sirid {

NoiseModel NoiseModel::known(Eigen::VectorXd sigma_t) {
  require(sigma_t.size() >= 1, ErrorKind::invalid_argument, "NoiseModel: empty sigma sequence");
  require(sigma_t.allFinite() && (sigma_t.array() >= 0.0).all(), ErrorKind::invalid_argument,
          "NoiseModel: sigma_t entries must be finite and nonnegative");
  return {NoiseKind::known_sequence, 0.0, std::move(sigma_t)};
}

NoiseModel NoiseModel::case1(double sigma) {
  require(sigma > 0.0 && sigma < 1.0, ErrorKind::invalid_argument,
          "NoiseModel: case1 sigma must lie in (0, 1)");
  return {NoiseKind::case1, sigma, {}};
}

NoiseModel NoiseModel::case2(double sigma) {
  require(std::isfinite(sigma) && sigma > 0.0, ErrorKind::invalid_argument,
          "NoiseModel: case2 sigma must be positive");
  return {NoiseKind::case2, sigma, {}};
}

NoiseModel NoiseModel::infection_root(double sigma) {
  require(std::isfinite(sigma) && sigma > 0.0, ErrorKind::invalid_argument,
          "NoiseModel: infection_root sigma must be positive");
  return {NoiseKind::infection_root, sigma, {}};
}

NoiseModel NoiseModel::make(NoiseKind kind, double sigma) {
  switch (kind) {
    case NoiseKind::case1: return case1(sigma);
    case NoiseKind::case2: return case2(sigma);
    case NoiseKind::infection_root: return infection_root(sigma);
    case NoiseKind::known_sequence: break;
  }
  fail(ErrorKind::invalid_argument, "NoiseModel::make: known sequences need explicit sigma_t");
}

NoiseModel NoiseModel::with_sigma(double sigma) const { return make(kind_, sigma); }

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::known_sequence: return "known_sequence";
    case NoiseKind::case1: return "case1";
    case NoiseKind::case2: return "case2";
    case NoiseKind::infection_root: return "infection_root";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(std::string_view name) {
  if (name == "known_sequence") return NoiseKind::known_sequence;
  if (name == "case1") return NoiseKind::case1;
  if (name == "case2") return NoiseKind::case2;
  if (name == "infection_root") return NoiseKind::infection_root;
  fail(ErrorKind::invalid_argument, "unknown noise kind '" + std::string(name) + "'");
}

Eigen::VectorXd sigma_sequence(const NoiseModel& noise, double population,
                               const Eigen::VectorXd& infected) {
  const auto days = infected.size();
  switch (noise.kind()) {
    case NoiseKind::known_sequence:
      require(noise.sigma_t().size() >= days, ErrorKind::insufficient_data,
              "sigma_sequence: known sequence shorter than the horizon");
      return noise.sigma_t().head(days);
    case NoiseKind::case1:
      return Eigen::VectorXd::Constant(days, population * noise.sigma());
    case NoiseKind::case2:
    case NoiseKind::infection_root:
      for (Eigen::Index t = 0; t < days; ++t) {
        require(infected(t) > 0.0, ErrorKind::degenerate_variance,
                "sigma_sequence: infected proportion is zero on day " + std::to_string(t + 1));
      }
      if (noise.kind() == NoiseKind::case2) return population * noise.sigma() * infected;
      return noise.sigma() * (population * infected.array()).sqrt().matrix();
  }
  fail(ErrorKind::invalid_argument, "sigma_sequence: unknown noise kind");
}

Eigen::VectorXd sigma_sequence(const NoiseModel& noise, const Trajectory& traj, int days) {
  require(days >= 1 && days <= traj.horizon(), ErrorKind::insufficient_data,
          "sigma_sequence: requested days exceed the trajectory horizon");
  return sigma_sequence(noise, traj.init().population(), traj.i().segment(1, days));
}

ObservationSeries observe(const Trajectory& traj, const NoiseModel& noise, double p, int days,
                          std::uint64_t seed) {
  require(p > 0.0 && p <= 1.0, ErrorKind::invalid_argument, "observe: p must lie in (0, 1]");
  require(days >= 1, ErrorKind::invalid_argument, "observe: need at least one day");
  require(days <= traj.horizon(), ErrorKind::insufficient_data,
          "observe: " + std::to_string(days) + " days requested but trajectory covers " +
              std::to_string(traj.horizon()));
  const Eigen::VectorXd mean = p * incidence(traj).head(days);
  const Eigen::VectorXd sd = sigma_sequence(noise, traj, days);
  Eigen::VectorXd values(days);
  for (int t = 0; t < days; ++t)
    values(t) = mean(t) + sd(t) * rng::standard_normal(seed, static_cast<std::uint64_t>(t + 1));
  return {std::move(values), p, noise, seed};
}

namespace rng {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane) {
  return mix64(mix64(mix64(seed) ^ counter) ^ (lane * 0xd1342543de82ef95ULL));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return hash(base, index, 0x5eedULL);
}

double uniform(std::uint64_t seed, std::uint64_t counter, std::uint64_t lane) {
  return (static_cast<double>(hash(seed, counter, lane) >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = uniform(seed, counter, 1);
  const double u2 = uniform(seed, counter, 2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

}  // namespace sirid
