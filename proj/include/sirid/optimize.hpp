#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace sirid {

/// Objective returning f(x) and writing its gradient. May throw sirid::Error
/// or return a non-finite value to mark x infeasible.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-8;  // on ||grad||_inf, relative to max(1, |f|)
  // A failed line search still counts as converged when the quasi-Newton
  // step predicts less than this decrease, relative to max(1, |f|).
  double value_tolerance = 1e-12;
  int max_iterations = 500;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value;
  Eigen::VectorXd gradient;
  int iterations;
  bool converged;
  std::string message;
  std::vector<double> trace;  // objective after each accepted step, starting at x0
};

/// Quasi-Newton minimization with an inverse-Hessian BFGS update and a
/// bracketing/zoom line search on the strong Wolfe conditions.
BfgsResult bfgs_minimize(const Objective& objective, Eigen::VectorXd x0,
                         const BfgsOptions& options = {});

}  // namespace sirid
