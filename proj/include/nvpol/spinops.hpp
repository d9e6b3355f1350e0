#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nvpol {

using cplx = std::complex<double>;

// Dense operator on a (joint) spin Hilbert space. Basis ordered by descending m.
using OperatorMatrix = Eigen::MatrixXcd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Spin quantum number stored as 2s, so half-integer spins stay exact.
class SpinQuantumNumber {
 public:
  explicit SpinQuantumNumber(int two_s);

  static SpinQuantumNumber half() { return SpinQuantumNumber(1); }
  static SpinQuantumNumber one() { return SpinQuantumNumber(2); }

  int two_s() const { return two_s_; }
  double value() const { return 0.5 * two_s_; }
  int dim() const { return two_s_ + 1; }
  // m of the k-th basis state, k = 0 is m = +s.
  double m(int k) const { return value() - k; }

  bool operator==(const SpinQuantumNumber&) const = default;

 private:
  int two_s_;
};

struct SpinOperators {
  OperatorMatrix x, y, z, plus, minus;
};

SpinOperators spin_operators(SpinQuantumNumber s);

// Identity ⊗ ... ⊗ op ⊗ ... ⊗ Identity with op at position `slot`.
// Slot 0 is the electron, slot 1 the nucleus.
OperatorMatrix embed(const OperatorMatrix& op, int slot, const std::vector<int>& dims);

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b);

int total_dim(const std::vector<int>& dims);

}  // namespace nvpol
