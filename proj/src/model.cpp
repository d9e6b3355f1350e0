#include "nvpol/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace nvpol {

HyperfineTensor HyperfineTensor::axial(double a_par_mhz, double a_perp_mhz) {
  HyperfineTensor h;
  h.form_ = AxialHyperfine{a_par_mhz, a_perp_mhz};
  return h;
}

HyperfineTensor HyperfineTensor::full(const Eigen::Matrix3d& a_mhz) {
  if ((a_mhz - a_mhz.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("hyperfine tensor must be symmetric");
  }
  HyperfineTensor h;
  h.form_ = a_mhz;
  return h;
}

Eigen::Matrix3d HyperfineTensor::as_matrix() const {
  if (is_axial()) {
    const auto& a = axial_part();
    return Eigen::Vector3d(a.a_perp_mhz, a.a_perp_mhz, a.a_par_mhz).asDiagonal();
  }
  return std::get<Eigen::Matrix3d>(form_);
}

void NVSystemParams::validate() const {
  if (!(d_es_mhz > 0)) throw std::invalid_argument("d_es must be positive");
  if (!(gamma_e_mhz_per_gauss > 0)) throw std::invalid_argument("gamma_e must be positive");
  if (!(std::abs(gamma_n_mhz_per_gauss) < gamma_e_mhz_per_gauss)) {
    throw std::invalid_argument("|gamma_n| must be smaller than gamma_e");
  }
  if (!b_gauss.allFinite() || !std::isfinite(e_es_mhz)) {
    throw std::invalid_argument("field and strain must be finite");
  }
}

void DissipationParams::validate() const {
  if (!(pump_rate_mhz >= 0)) throw std::invalid_argument("pump_rate must be >= 0");
  if (!(pump_leak_ratio >= 0 && pump_leak_ratio <= 1)) {
    throw std::invalid_argument("pump_leak_ratio must lie in [0, 1]");
  }
  if (!(t1_electron_us > 0) || !(t1_nuclear_us > 0)) {
    throw std::invalid_argument("relaxation times must be positive");
  }
}

OperatorMatrix build_hyperfine(const HyperfineTensor& h, const std::vector<int>& dims) {
  if (dims.size() != 2 || dims[0] != 3 || dims[1] < 2) {
    throw DimensionError("hyperfine: expected dims {3, 2I+1}");
  }
  const auto s = spin_operators(SpinQuantumNumber::one());
  const auto i = spin_operators(SpinQuantumNumber(dims[1] - 1));

  if (h.is_axial()) {
    const auto& a = h.axial_part();
    const OperatorMatrix szz = kron(s.z, i.z);
    const OperatorMatrix flip = kron(s.minus, i.plus) + kron(s.plus, i.minus);
    return a.a_par_mhz * szz + (0.5 * a.a_perp_mhz) * flip;
  }

  const Eigen::Matrix3d a = h.as_matrix();
  const OperatorMatrix* sv[3] = {&s.x, &s.y, &s.z};
  const OperatorMatrix* iv[3] = {&i.x, &i.y, &i.z};
  const int n = 3 * dims[1];
  OperatorMatrix out = OperatorMatrix::Zero(n, n);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (a(r, c) == 0.0) continue;
      // A_rc I_r S_c
      out += a(r, c) * kron(*sv[c], *iv[r]);
    }
  }
  return out;
}

OperatorMatrix build_hamiltonian(const NVSystemParams& p) {
  p.validate();
  const auto dims = p.dims();
  const auto s = spin_operators(SpinQuantumNumber::one());
  const auto i = spin_operators(p.nuclear_spin);

  const OperatorMatrix s2 = s.x * s.x + s.y * s.y + s.z * s.z;
  const OperatorMatrix electron = p.d_es_mhz * (s.z * s.z - s2 / 3.0) +
                                  p.e_es_mhz * (s.x * s.x - s.y * s.y) +
                                  p.gamma_e_mhz_per_gauss *
                                      (p.b_gauss.x() * s.x + p.b_gauss.y() * s.y +
                                       p.b_gauss.z() * s.z);
  const OperatorMatrix nuclear = p.gamma_n_mhz_per_gauss * (p.b_gauss.x() * i.x +
                                                            p.b_gauss.y() * i.y +
                                                            p.b_gauss.z() * i.z);
  OperatorMatrix h = embed(electron, 0, dims) + embed(nuclear, 1, dims) +
                     build_hyperfine(p.hyperfine, dims);
  // scrub rounding asymmetry
  return 0.5 * (h + h.adjoint());
}

std::vector<CollapseChannel> build_collapse_ops(const DissipationParams& d,
                                                const std::vector<int>& dims) {
  d.validate();
  if (dims.size() != 2 || dims[0] != 3) throw DimensionError("collapse: expected dims {3, n}");
  const int ne = dims[0];
  const int nn = dims[1];

  auto electron_jump = [&](int to, int from) {
    OperatorMatrix e = OperatorMatrix::Zero(ne, ne);
    e(to, from) = 1.0;
    return embed(e, 0, dims);
  };
  auto nuclear_jump = [&](int to, int from) {
    OperatorMatrix e = OperatorMatrix::Zero(nn, nn);
    e(to, from) = 1.0;
    return embed(e, 1, dims);
  };

  // electron basis indices: 0 -> m_s=+1, 1 -> m_s=0, 2 -> m_s=-1
  constexpr int kZero = 1;
  std::vector<CollapseChannel> out;

  if (d.pump_rate_mhz > 0) {
    out.push_back({electron_jump(kZero, 0), d.pump_rate_mhz, "pump +1->0"});
    out.push_back({electron_jump(kZero, 2), d.pump_rate_mhz, "pump -1->0"});
    const double leak = d.pump_rate_mhz * d.pump_leak_ratio;
    if (leak > 0) {
      out.push_back({electron_jump(0, kZero), leak, "leak 0->+1"});
      out.push_back({electron_jump(2, kZero), leak, "leak 0->-1"});
    }
  }

  if (std::isfinite(d.t1_electron_us)) {
    const double rate = 1.0 / (2.0 * d.t1_electron_us);
    for (int a = 0; a < ne; ++a) {
      for (int b = 0; b < ne; ++b) {
        if (a == b) continue;
        std::ostringstream label;
        label << "T1e " << b << "->" << a;
        out.push_back({electron_jump(a, b), rate, label.str()});
      }
    }
  }

  if (std::isfinite(d.t1_nuclear_us)) {
    const double rate = 1.0 / (2.0 * d.t1_nuclear_us);
    for (int k = 0; k + 1 < nn; ++k) {
      out.push_back({nuclear_jump(k, k + 1), rate, "T1n up " + std::to_string(k + 1)});
      out.push_back({nuclear_jump(k + 1, k), rate, "T1n down " + std::to_string(k)});
    }
  }
  return out;
}

Liouvillian liouvillian(const OperatorMatrix& hamiltonian,
                        const std::vector<CollapseChannel>& collapse) {
  const int n = static_cast<int>(hamiltonian.rows());
  if (hamiltonian.cols() != n) throw DimensionError("liouvillian: Hamiltonian must be square");
  for (const auto& c : collapse) {
    if (c.op.rows() != n || c.op.cols() != n) {
      std::ostringstream msg;
      msg << "liouvillian: collapse operator '" << c.label << "' is " << c.op.rows() << "x"
          << c.op.cols() << ", Hamiltonian is " << n << "x" << n;
      throw DimensionError(msg.str());
    }
  }

  // Column stacking: vec(A rho B) = (B^T kron A) vec(rho).
  const OperatorMatrix id = OperatorMatrix::Identity(n, n);
  const cplx minus_i_omega(0.0, -2.0 * std::numbers::pi);
  Liouvillian l;
  l.hilbert_dim = n;
  l.matrix = minus_i_omega * (kron(id, hamiltonian) - kron(hamiltonian.transpose(), id));
  for (const auto& c : collapse) {
    const OperatorMatrix cdc = c.op.adjoint() * c.op;
    l.matrix += c.rate * (kron(c.op.conjugate(), c.op) -
                          0.5 * (kron(id, cdc) + kron(cdc.transpose(), id)));
  }
  return l;
}

Liouvillian build_model(const NVSystemParams& p, const DissipationParams& d) {
  return liouvillian(build_hamiltonian(p), build_collapse_ops(d, p.dims()));
}

}  // namespace nvpol
