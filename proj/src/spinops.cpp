#include "nvpol/spinops.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

namespace nvpol {

SpinQuantumNumber::SpinQuantumNumber(int two_s) : two_s_(two_s) {
  if (two_s < 1) {
    throw std::invalid_argument("spin must satisfy 2s >= 1, got 2s = " + std::to_string(two_s));
  }
}

SpinOperators spin_operators(SpinQuantumNumber s) {
  const int n = s.dim();
  const double j = s.value();

  SpinOperators ops;
  ops.z = OperatorMatrix::Zero(n, n);
  ops.plus = OperatorMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double m = s.m(k);
    ops.z(k, k) = m;
    // S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and |m+1> sits at index k-1
    if (k > 0) ops.plus(k - 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  ops.minus = ops.plus.adjoint();
  ops.x = 0.5 * (ops.plus + ops.minus);
  ops.y = cplx(0, -0.5) * (ops.plus - ops.minus);
  return ops;
}

int total_dim(const std::vector<int>& dims) {
  int n = 1;
  for (int d : dims) n *= d;
  return n;
}

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

OperatorMatrix embed(const OperatorMatrix& op, int slot, const std::vector<int>& dims) {
  if (slot < 0 || slot >= static_cast<int>(dims.size())) {
    std::ostringstream msg;
    msg << "embed: slot " << slot << " out of range for " << dims.size() << " subsystems";
    throw DimensionError(msg.str());
  }
  if (op.rows() != op.cols() || op.rows() != dims[slot]) {
    std::ostringstream msg;
    msg << "embed: operator is " << op.rows() << "x" << op.cols() << " but subsystem " << slot
        << " has dimension " << dims[slot];
    throw DimensionError(msg.str());
  }

  OperatorMatrix out = OperatorMatrix::Identity(1, 1);
  for (int k = 0; k < static_cast<int>(dims.size()); ++k) {
    if (k == slot) {
      out = kron(out, op);
    } else {
      out = kron(out, OperatorMatrix::Identity(dims[k], dims[k]));
    }
  }
  return out;
}

}  // namespace nvpol
