#include "nvpol/solver.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace nvpol {

DensityMatrix::DensityMatrix(OperatorMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) throw InvalidState("density matrix must be square");
  const double asym = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTol) {
    std::ostringstream msg;
    msg << "density matrix not Hermitian (max |rho - rho^dag| = " << asym << ")";
    throw InvalidState(msg.str());
  }
  const cplx tr = m_.trace();
  if (std::abs(tr - 1.0) > kTraceTol) {
    std::ostringstream msg;
    msg << "density matrix trace " << tr << " != 1";
    throw InvalidState(msg.str());
  }
  const OperatorMatrix herm = 0.5 * (m_ + m_.adjoint());
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(herm, Eigen::EigenvaluesOnly);
  const double lowest = es.eigenvalues().minCoeff();
  if (lowest < -kPsdTol) {
    std::ostringstream msg;
    msg << "density matrix not positive semidefinite (lowest eigenvalue " << lowest << ")";
    throw InvalidState(msg.str());
  }
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  return DensityMatrix(OperatorMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix DensityMatrix::pure(const Eigen::VectorXcd& psi) {
  const Eigen::VectorXcd u = psi.normalized();
  return DensityMatrix(u * u.adjoint());
}

Eigen::VectorXcd vectorize(const OperatorMatrix& m) {
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

OperatorMatrix unvectorize(const Eigen::VectorXcd& v, int n) {
  if (v.size() != static_cast<Eigen::Index>(n) * n) throw DimensionError("unvectorize: size mismatch");
  return Eigen::Map<const OperatorMatrix>(v.data(), n, n);
}

SteadyStateReport steady_state(const Liouvillian& l, double tol_null) {
  const int n = l.hilbert_dim;
  const Eigen::Index n2 = static_cast<Eigen::Index>(n) * n;
  if (l.matrix.rows() != n2 || l.matrix.cols() != n2) {
    throw DimensionError("steady_state: Liouvillian shape does not match hilbert_dim");
  }

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(l.matrix, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();  // descending
  const double sigma_max = sv(0);
  if (sigma_max == 0.0) {
    throw DegenerateSteadyState("steady_state: Liouvillian is identically zero", static_cast<int>(n2));
  }
  int null_dim = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) < tol_null * sigma_max) ++null_dim;
  }
  if (null_dim == 0) {
    std::ostringstream msg;
    msg << "steady_state: no singular value below " << tol_null << " * sigma_max (smallest ratio "
        << sv(sv.size() - 1) / sigma_max << ")";
    throw NoStationaryState(msg.str());
  }
  if (null_dim > 1) {
    std::ostringstream msg;
    msg << "steady_state: null space has dimension " << null_dim;
    throw DegenerateSteadyState(msg.str(), null_dim);
  }

  const Eigen::VectorXcd v = svd.matrixV().col(n2 - 1);
  OperatorMatrix rho = unvectorize(v, n);
  const cplx tr = rho.trace();
  if (std::abs(tr) < 1e-12) throw InvalidState("steady_state: null vector has zero trace");
  rho /= tr;
  rho = 0.5 * (rho + rho.adjoint());

  SteadyStateReport report{DensityMatrix(rho), 0.0, null_dim};
  report.residual_norm = (l.matrix * vectorize(report.rho.matrix())).norm();
  return report;
}

DensityMatrix evolve(const DensityMatrix& rho0, const Liouvillian& l, double t_us) {
  if (t_us < 0) throw std::invalid_argument("evolve: negative time");
  if (rho0.dim() != l.hilbert_dim) throw DimensionError("evolve: state and Liouvillian disagree");
  if (t_us == 0.0) return rho0;
  const int n = rho0.dim();
  Eigen::MatrixXcd propagator = (l.matrix * t_us).exp();

  // Long propagations lose digits in the squaring phase. The exact propagator
  // satisfies vec(I)^dag P = vec(I)^dag, so the computed one is projected back.
  const Eigen::VectorXcd w = vectorize(OperatorMatrix::Identity(n, n));
  const Eigen::RowVectorXcd defect = w.adjoint() - w.adjoint() * propagator;
  propagator += (w / static_cast<double>(n)) * defect;

  OperatorMatrix rho = unvectorize(propagator * vectorize(rho0.matrix()), n);
  const double asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const cplx tr = rho.trace();
  if (asym > kEvolveTol || std::abs(tr - 1.0) > kEvolveTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "evolve: propagated state drifted (asymmetry " << asym << ", trace " << tr << ")";
    throw InvalidState(msg.str());
  }
  rho = 0.5 * (rho + rho.adjoint()) / tr.real();
  return DensityMatrix(rho);
}

DensityMatrix partial_trace(const DensityMatrix& rho, int keep, const std::vector<int>& dims) {
  if (dims.size() != 2) throw DimensionError("partial_trace: expected two subsystems");
  if (total_dim(dims) != rho.dim()) {
    std::ostringstream msg;
    msg << "partial_trace: dims multiply to " << total_dim(dims) << " but state has dimension "
        << rho.dim();
    throw DimensionError(msg.str());
  }
  if (keep != 0 && keep != 1) throw DimensionError("partial_trace: keep must be 0 or 1");

  const int na = dims[0];
  const int nb = dims[1];
  const OperatorMatrix& m = rho.matrix();
  if (keep == 0) {
    OperatorMatrix out = OperatorMatrix::Zero(na, na);
    for (int a = 0; a < na; ++a)
      for (int ap = 0; ap < na; ++ap)
        for (int b = 0; b < nb; ++b) out(a, ap) += m(a * nb + b, ap * nb + b);
    return DensityMatrix(out);
  }
  OperatorMatrix out = OperatorMatrix::Zero(nb, nb);
  for (int b = 0; b < nb; ++b)
    for (int bp = 0; bp < nb; ++bp)
      for (int a = 0; a < na; ++a) out(b, bp) += m(a * nb + b, a * nb + bp);
  return DensityMatrix(out);
}

double nuclear_polarization(const DensityMatrix& rho, const std::vector<int>& dims,
                            SpinQuantumNumber nuclear_spin) {
  if (dims.size() != 2 || dims[1] != nuclear_spin.dim()) {
    throw DimensionError("nuclear_polarization: nuclear dimension does not match spin");
  }
  const DensityMatrix reduced = partial_trace(rho, 1, dims);
  double expectation = 0.0;
  for (int k = 0; k < reduced.dim(); ++k) expectation += nuclear_spin.m(k) * reduced(k, k).real();
  return expectation / nuclear_spin.value();
}

double electron_polarization(const DensityMatrix& rho, const std::vector<int>& dims) {
  if (dims.empty() || dims[0] != 3) throw DimensionError("electron_polarization: electron must be spin 1");
  const DensityMatrix reduced = partial_trace(rho, 0, dims);
  return reduced(1, 1).real();
}

}  // namespace nvpol
