#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace semreg {

struct BoundedMinimizeOptions {
  int max_iterations = 500;
  double relative_cost_tolerance = 1e-10;
  double gradient_tolerance = 1e-8;  // infinity norm of the projected gradient
  double gradient_step = 1e-6;       // central-difference step, relative to max(1, |x_i|)
};

struct BoundedMinimizeResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // cost at x0, then after every accepted step
};

/// Box-constrained quasi-Newton descent (projected BFGS with an active set and
/// Armijo backtracking along the projected path). Gradients come from central
/// differences of `cost`. Every iterate stays inside [lower, upper] and the
/// recorded cost sequence never increases.
BoundedMinimizeResult minimize_bounded(const std::function<double(const Eigen::VectorXd&)>& cost,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper, const BoundedMinimizeOptions& options = {});

}  // namespace semreg
