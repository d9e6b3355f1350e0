#include "nvpol/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nvpol {

double LsqResult::uncertainty(int k) const {
  if (covariance.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(std::max(0.0, covariance(k, k)));
}

namespace {

double bound_or(const Eigen::VectorXd& b, int k, double fallback) {
  return b.size() > k ? b(k) : fallback;
}

Eigen::VectorXd project(Eigen::VectorXd x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < x.size(); ++k) {
    x(k) = std::clamp(x(k), bound_or(lower, k, -inf), bound_or(upper, k, inf));
  }
  return x;
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd r0 = f(x);
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (int k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
    const double lo = bound_or(lower, k, -inf);
    const double hi = bound_or(upper, k, inf);
    Eigen::VectorXd xp = x, xm = x;
    if (x(k) - h < lo) {
      xp(k) += h;
      jac.col(k) = (f(xp) - r0) / h;
    } else if (x(k) + h > hi) {
      xm(k) -= h;
      jac.col(k) = (r0 - f(xm)) / h;
    } else {
      xp(k) += h;
      xm(k) -= h;
      jac.col(k) = (f(xp) - f(xm)) / (2 * h);
    }
  }
  return jac;
}

LsqResult damped_least_squares(const LsqProblem& problem, const Eigen::VectorXd& x0,
                               const LsqOptions& options) {
  auto jacobian_at = [&](const Eigen::VectorXd& x) {
    return problem.jacobian ? problem.jacobian(x)
                            : numerical_jacobian(problem.residuals, x, problem.lower, problem.upper);
  };

  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd x = project(x0, problem.lower, problem.upper);
  Eigen::VectorXd r = problem.residuals(x);
  double cost = r.squaredNorm();
  Eigen::MatrixXd jac = jacobian_at(x);

  LsqResult result;
  double lambda = -1.0;
  double nu = 2.0;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    const double diag_max = jtj.diagonal().maxCoeff();
    if (lambda < 0) lambda = 1e-3 * std::max(diag_max, 1e-300);

    if (g.cwiseAbs().maxCoeff() <= options.gradient_tolerance * std::max(cost, 1e-300) ||
        cost == 0.0) {
      result.converged = true;
      break;
    }

    // Marquardt scaling with a floor so zero columns stay solvable.
    Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12 * std::max(diag_max, 1e-300));
    bool accepted = false;
    bool small_step = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * scale;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd x_new = project(x + step, problem.lower, problem.upper);
      const Eigen::VectorXd actual = x_new - x;
      if (actual.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
        small_step = true;
        break;
      }
      const Eigen::VectorXd r_new = problem.residuals(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        // gain ratio against the linear model
        const double predicted = -(2.0 * g.dot(actual) + (jac * actual).squaredNorm());
        const double rho = predicted > 0 ? (cost - cost_new) / predicted : 1.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        const double rel_decrease = (cost - cost_new) / std::max(cost, 1e-300);
        x = x_new;
        r = r_new;
        cost = cost_new;
        jac = jacobian_at(x);
        accepted = true;
        if (rel_decrease < options.cost_tolerance) small_step = true;
        if (actual.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
          small_step = true;
        }
        break;
      }
      lambda *= nu;
      nu *= 2.0;
    }
    if (small_step) {
      result.converged = true;
      ++iter;
      break;
    }
    if (!accepted) {
      // no descent direction left at machine precision
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.x = x;
  result.residuals = r;
  result.residual_norm = std::sqrt(cost);
  result.iterations = iter;

  const int m = static_cast<int>(r.size());
  const double s2 = m > n ? cost / (m - n) : 0.0;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
  result.covariance = s2 * cod.pseudoInverse();

  constexpr double inf = std::numeric_limits<double>::infinity();
  result.at_lower.resize(n);
  result.at_upper.resize(n);
  for (int k = 0; k < n; ++k) {
    result.at_lower[k] = x(k) <= bound_or(problem.lower, k, -inf);
    result.at_upper[k] = x(k) >= bound_or(problem.upper, k, inf);
  }
  return result;
}

}  // namespace nvpol
