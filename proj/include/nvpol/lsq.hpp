#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nvpol {

// Damped Gauss-Newton (Levenberg-Marquardt) with box constraints handled by projection.

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LsqProblem {
  ResidualFn residuals;
  JacobianFn jacobian;  // empty -> finite differences
  Eigen::VectorXd lower;  // may be empty (unbounded)
  Eigen::VectorXd upper;
};

struct LsqOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-12;      // relative
  double cost_tolerance = 1e-15;      // relative decrease
  double gradient_tolerance = 1e-14;  // scaled
};

struct LsqResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // s^2 (J^T J)^+ at the solution, s^2 = |r|^2 / (m - n)
  Eigen::MatrixXd covariance;
  std::vector<bool> at_lower;
  std::vector<bool> at_upper;

  double uncertainty(int k) const;
};

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& lower = {},
                                   const Eigen::VectorXd& upper = {});

LsqResult damped_least_squares(const LsqProblem& problem, const Eigen::VectorXd& x0,
                               const LsqOptions& options = {});

}  // namespace nvpol
