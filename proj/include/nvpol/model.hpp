#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nvpol/spinops.hpp"

namespace nvpol {

// Frequencies are linear (MHz), fields in Gauss, times in microseconds.
// Incoherent rates are in 1/us; the 2*pi for coherent terms is applied in liouvillian().

inline constexpr double kDefaultDes = 1400.0;         // MHz
inline constexpr double kDefaultGammaE = 2.8025;      // MHz/G, g = 2
inline constexpr double kDefaultGammaN14 = 3.077e-4;  // MHz/G, 14N
inline constexpr double kDefaultHyperfine = 40.0;     // MHz

struct AxialHyperfine {
  double a_par_mhz = kDefaultHyperfine;
  double a_perp_mhz = kDefaultHyperfine;
};

// Either the axial (a_par, a_perp) form or a full symmetric 3x3 tensor in MHz.
class HyperfineTensor {
 public:
  HyperfineTensor() = default;
  static HyperfineTensor axial(double a_par_mhz, double a_perp_mhz);
  // Throws std::invalid_argument if the tensor is not symmetric to 1e-12.
  static HyperfineTensor full(const Eigen::Matrix3d& a_mhz);

  bool is_axial() const { return std::holds_alternative<AxialHyperfine>(form_); }
  const AxialHyperfine& axial_part() const { return std::get<AxialHyperfine>(form_); }
  Eigen::Matrix3d as_matrix() const;

 private:
  std::variant<AxialHyperfine, Eigen::Matrix3d> form_ = AxialHyperfine{};
};

struct NVSystemParams {
  double d_es_mhz = kDefaultDes;
  double e_es_mhz = 0.0;
  Eigen::Vector3d b_gauss = Eigen::Vector3d::Zero();
  double gamma_e_mhz_per_gauss = kDefaultGammaE;
  double gamma_n_mhz_per_gauss = kDefaultGammaN14;
  HyperfineTensor hyperfine;
  SpinQuantumNumber nuclear_spin = SpinQuantumNumber::one();

  void validate() const;
  // {electron, nucleus}
  std::vector<int> dims() const { return {3, nuclear_spin.dim()}; }
};

struct DissipationParams {
  double pump_rate_mhz = 10.0;
  double pump_leak_ratio = 0.0;
  // +infinity disables the channel.
  double t1_electron_us = 100.0;
  double t1_nuclear_us = 1000.0;

  void validate() const;
};

struct CollapseChannel {
  OperatorMatrix op;
  double rate;  // 1/us
  std::string label;
};

// n^2 x n^2 generator acting on column-stacked vec(rho), time in us.
struct Liouvillian {
  Eigen::MatrixXcd matrix;
  int hilbert_dim = 0;
};

OperatorMatrix build_hamiltonian(const NVSystemParams& p);

// dims = {electron, nucleus}; the electron is spin 1.
OperatorMatrix build_hyperfine(const HyperfineTensor& h, const std::vector<int>& dims);

std::vector<CollapseChannel> build_collapse_ops(const DissipationParams& d,
                                                const std::vector<int>& dims);

Liouvillian liouvillian(const OperatorMatrix& hamiltonian,
                        const std::vector<CollapseChannel>& collapse);

// Convenience: Hamiltonian + collapse channels + generator in one go.
Liouvillian build_model(const NVSystemParams& p, const DissipationParams& d);

class UnreachableTarget : public std::runtime_error {
 public:
  UnreachableTarget(const std::string& what, double lowest, double highest)
      : std::runtime_error(what), lowest_(lowest), highest_(highest) {}
  double lowest() const { return lowest_; }
  double highest() const { return highest_; }

 private:
  double lowest_;
  double highest_;
};

// Bisects pump_leak_ratio on [0, 1] so that the steady-state m_s = 0 population
// at B = 0 and A_perp = 0 matches `target` to within 1e-3.
DissipationParams calibrate_pump(double target, const DissipationParams& d,
                                 const NVSystemParams& p);

}  // namespace nvpol
