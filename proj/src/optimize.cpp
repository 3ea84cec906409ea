#include "sirid/optimize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "sirid/error.hpp"

namespace sirid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Probe {
  double alpha;
  double value;
  double slope;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
};

Probe evaluate(const Objective& objective, const Eigen::VectorXd& x0, const Eigen::VectorXd& dir,
               double alpha) {
  Probe p{alpha, kInf, kInf, x0 + alpha * dir, Eigen::VectorXd::Zero(x0.size())};
  try {
    p.value = objective(p.x, p.gradient);
  } catch (const Error&) {
    p.value = kInf;
  }
  if (!std::isfinite(p.value) || !p.gradient.allFinite()) {
    p.value = kInf;
    return p;
  }
  p.slope = p.gradient.dot(dir);
  return p;
}

// Minimizer of the cubic through two probes, safeguarded to the inner part
// of the bracket; falls back to bisection.
double interpolate(const Probe& lo, const Probe& hi) {
  const double a = lo.alpha, b = hi.alpha;
  const double mid = 0.5 * (a + b);
  if (!std::isfinite(hi.value) || !std::isfinite(hi.slope)) return a + 0.25 * (b - a);
  const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
  const double disc = d1 * d1 - lo.slope * hi.slope;
  if (disc < 0.0) return mid;
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
  const double lo_edge = std::min(a, b) + 0.1 * std::abs(b - a);
  const double hi_edge = std::max(a, b) - 0.1 * std::abs(b - a);
  if (!std::isfinite(t) || t < lo_edge || t > hi_edge) return mid;
  return t;
}

struct LineSearch {
  const Objective& objective;
  const BfgsOptions& options;
  const Eigen::VectorXd& x0;
  const Eigen::VectorXd& dir;
  double f0;
  double g0;

  bool sufficient(const Probe& p) const {
    if (p.value <= f0 + options.wolfe_c1 * p.alpha * g0) return true;
    // Approximate Wolfe: no increase at all and the slope has dropped, for
    // steps whose predicted decrease is below rounding in f.
    return p.value <= f0 && p.slope <= (2.0 * options.wolfe_c1 - 1.0) * g0;
  }
  bool curvature(const Probe& p) const { return std::abs(p.slope) <= -options.wolfe_c2 * g0; }

  std::optional<Probe> zoom(Probe lo, Probe hi) const {
    for (int k = 0; k < 40; ++k) {
      const Probe p = evaluate(objective, x0, dir, interpolate(lo, hi));
      if (!sufficient(p) || p.value >= lo.value) {
        hi = p;
      } else {
        if (curvature(p)) return p;
        if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = p;
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
    }
    if (lo.alpha > 0.0 && lo.value < f0) return lo;
    return std::nullopt;
  }

  std::optional<Probe> run(double alpha) const {
    Probe prev{0.0, f0, g0, x0, {}};
    for (int k = 0; k < 30; ++k) {
      const Probe p = evaluate(objective, x0, dir, alpha);
      if (!sufficient(p) || (k > 0 && p.value >= prev.value)) return zoom(prev, p);
      if (curvature(p)) return p;
      if (p.slope >= 0.0) return zoom(p, prev);
      prev = p;
      alpha *= 2.0;
    }
    return std::nullopt;
  }
};

}  // namespace

BfgsResult bfgs_minimize(const Objective& objective, Eigen::VectorXd x0, const BfgsOptions& options) {
  const auto n = x0.size();
  BfgsResult result{x0, kInf, Eigen::VectorXd::Zero(n), 0, false, {}, {}};
  result.value = objective(result.x, result.gradient);
  require(std::isfinite(result.value) && result.gradient.allFinite(),
          ErrorKind::optimization_failure, "bfgs: objective not finite at the starting point");
  result.trace.push_back(result.value);

  Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  auto small_gradient = [&] {
    return result.gradient.lpNorm<Eigen::Infinity>() <=
           options.gradient_tolerance * std::max(1.0, std::abs(result.value));
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (small_gradient()) {
      result.converged = true;
      result.message = "gradient tolerance met";
      return result;
    }
    Eigen::VectorXd dir = -inv_hessian * result.gradient;
    double g0 = result.gradient.dot(dir);
    if (!(g0 < 0.0)) {
      inv_hessian.setIdentity();
      dir = -result.gradient;
      g0 = -result.gradient.squaredNorm();
    }
    // First step of an unscaled search is capped so log-coordinates move by at most 1.
    double alpha = scaled ? 1.0 : std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>());
    const double predicted_decrease = scaled ? -g0 : kInf;
    LineSearch search{objective, options, result.x, dir, result.value, g0};
    std::optional<Probe> step = search.run(alpha);
    if (!step && predicted_decrease <= options.value_tolerance * std::max(1.0, std::abs(result.value))) {
      result.converged = true;
      result.message = "predicted decrease below objective resolution";
      return result;
    }
    if (!step && scaled) {
      inv_hessian.setIdentity();
      scaled = false;
      dir = -result.gradient;
      g0 = -result.gradient.squaredNorm();
      LineSearch retry{objective, options, result.x, dir, result.value, g0};
      step = retry.run(std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()));
    }
    if (!step) {
      result.message = "line search failed";
      result.converged = small_gradient();
      return result;
    }

    const Eigen::VectorXd s = step->x - result.x;
    const Eigen::VectorXd y = step->gradient - result.gradient;
    result.x = step->x;
    result.value = step->value;
    result.gradient = step->gradient;
    result.iterations = iter + 1;
    result.trace.push_back(result.value);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hessian = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      inv_hessian = left * inv_hessian * left.transpose() + rho * s * s.transpose();
    }
  }
  result.converged = small_gradient();
  result.message = result.converged ? "gradient tolerance met" : "iteration limit reached";
  return result;
}

}  // namespace sirid
