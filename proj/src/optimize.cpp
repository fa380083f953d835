#include "semreg/optimize.hpp"

#include "semreg/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace semreg {

namespace {

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

/// Components of g that can still move the iterate: zero where a bound blocks descent.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if ((x[i] <= lo[i] && g[i] > 0) || (x[i] >= hi[i] && g[i] < 0)) pg[i] = 0.0;
  return pg;
}

}  // namespace

BoundedMinimizeResult minimize_bounded(const std::function<double(const Eigen::VectorXd&)>& cost,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper, const BoundedMinimizeOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n)
    throw Error(ErrorKind::InvalidArgument, "bound vectors do not match parameter count");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(lower[i] <= x0[i] && x0[i] <= upper[i]))
      throw Error(ErrorKind::InvalidArgument, "initial value " + std::to_string(i) + " lies outside its bounds");

  BoundedMinimizeResult result;
  Eigen::VectorXd x = x0;
  double fx = cost(x);
  result.cost_history.push_back(fx);
  Eigen::VectorXd g = numeric_gradient(cost, x, options.gradient_step);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int small_decreases = 0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    const Eigen::VectorXd pg = projected_gradient(x, g, lower, upper);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tolerance || fx == 0.0) {
      result.converged = true;
      break;
    }

    // Quasi-Newton direction restricted to the free variables.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (pg[i] != 0.0 || g[i] == 0.0) free.push_back(i);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < free.size(); ++a)
      for (std::size_t b = 0; b < free.size(); ++b) d[free[a]] -= H(free[a], free[b]) * g[free[b]];
    if (d.dot(pg) >= 0.0) {
      H.setIdentity();
      scaled = false;
      d = -pg;
    }

    Eigen::VectorXd x_new;
    double f_new = fx;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double alpha = 1.0;
      for (int k = 0; k < 60; ++k, alpha *= 0.5) {
        x_new = project(x + alpha * d, lower, upper);
        if (x_new == x) break;
        f_new = cost(x_new);
        if (f_new <= fx + 1e-4 * g.dot(x_new - x) && f_new <= fx) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // Fall back to steepest descent once before declaring a stall.
        H.setIdentity();
        scaled = false;
        d = -pg;
      }
    }
    if (!accepted) {
      result.converged = true;
      break;
    }

    const Eigen::VectorXd g_new = numeric_gradient(cost, x_new, options.gradient_step);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }

    const double decrease = (fx - f_new) / std::max(fx, 1e-300);
    x = x_new;
    fx = f_new;
    g = g_new;
    result.cost_history.push_back(fx);
    result.iterations = iter + 1;
    small_decreases = decrease < options.relative_cost_tolerance ? small_decreases + 1 : 0;
    if (small_decreases >= 2) {
      result.converged = true;
      break;
    }
  }
  result.x = x;
  result.cost = fx;
  return result;
}

}  // namespace semreg
