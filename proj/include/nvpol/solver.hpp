#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nvpol/model.hpp"
#include "nvpol/spinops.hpp"

namespace nvpol {

// Hermitian, unit-trace, positive semidefinite state. Construction validates.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kPsdTol = 1e-9;

  // Throws InvalidState if any invariant fails.
  explicit DensityMatrix(OperatorMatrix m);

  static DensityMatrix maximally_mixed(int dim);
  static DensityMatrix pure(const Eigen::VectorXcd& psi);

  int dim() const { return static_cast<int>(m_.rows()); }
  const OperatorMatrix& matrix() const { return m_; }
  cplx operator()(int r, int c) const { return m_(r, c); }

 private:
  OperatorMatrix m_;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string kind() const = 0;
};

class InvalidState : public SolverError {
 public:
  using SolverError::SolverError;
  std::string kind() const override { return "invalid_state"; }
};

class NoStationaryState : public SolverError {
 public:
  using SolverError::SolverError;
  std::string kind() const override { return "no_stationary_state"; }
};

class DegenerateSteadyState : public SolverError {
 public:
  DegenerateSteadyState(const std::string& what, int null_dim)
      : SolverError(what), null_dim_(null_dim) {}
  std::string kind() const override { return "degenerate_steady_state"; }
  int null_space_dim() const { return null_dim_; }

 private:
  int null_dim_;
};

struct SteadyStateReport {
  DensityMatrix rho;
  double residual_norm;  // ||L vec(rho)||_2
  int null_space_dim;
};

inline constexpr double kNullTolerance = 1e-9;

// Null space of L by SVD; singular values below tol * sigma_max count as zero.
SteadyStateReport steady_state(const Liouvillian& l, double tol_null = kNullTolerance);

inline constexpr double kEvolveTol = 1e-8;

// vec(rho(t)) = exp(L t) vec(rho0), t in us. Trace and Hermiticity are checked
// to kEvolveTol before the result is renormalized.
DensityMatrix evolve(const DensityMatrix& rho0, const Liouvillian& l, double t_us);

Eigen::VectorXcd vectorize(const OperatorMatrix& m);
OperatorMatrix unvectorize(const Eigen::VectorXcd& v, int n);

DensityMatrix partial_trace(const DensityMatrix& rho, int keep, const std::vector<int>& dims);

// <I_z> / I of the reduced nuclear state (slot 1).
double nuclear_polarization(const DensityMatrix& rho, const std::vector<int>& dims,
                            SpinQuantumNumber nuclear_spin);

// Population of m_s = 0 in the reduced electron state (slot 0).
double electron_polarization(const DensityMatrix& rho, const std::vector<int>& dims);

}  // namespace nvpol
