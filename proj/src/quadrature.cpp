#include "nvpol/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace nvpol {

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  // Jacobi matrix of the Hermite recurrence: off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

double gaussian_average(const std::function<double(double)>& f, double mean, double sigma,
                        int n_nodes) {
  if (sigma < 0) throw std::invalid_argument("gaussian_average: sigma must be >= 0");
  if (sigma == 0.0) return f(mean);
  const auto rule = gauss_hermite(n_nodes);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    acc += rule.weights[k] * f(mean + std::numbers::sqrt2 * sigma * rule.nodes[k]);
  }
  return acc / std::sqrt(std::numbers::pi);
}

}  // namespace nvpol
