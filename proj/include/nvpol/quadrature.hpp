#pragma once

#include <functional>
#include <vector>

namespace nvpol {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Physicists' Gauss-Hermite rule for weight exp(-x^2), via Golub-Welsch.
QuadratureRule gauss_hermite(int n);

// E[f(X)] for X ~ Normal(mean, sigma). sigma == 0 evaluates f(mean) once.
double gaussian_average(const std::function<double(double)>& f, double mean, double sigma,
                        int n_nodes);

}  // namespace nvpol
