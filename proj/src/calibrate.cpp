#include <cmath>
#include <sstream>

#include "nvpol/model.hpp"
#include "nvpol/solver.hpp"

namespace nvpol {

namespace {

double zero_field_electron_polarization(const NVSystemParams& p, const DissipationParams& d) {
  const auto report = steady_state(build_model(p, d));
  return electron_polarization(report.rho, p.dims());
}

}  // namespace

DissipationParams calibrate_pump(double target, const DissipationParams& d,
                                 const NVSystemParams& p) {
  if (!(target > 0 && target <= 1)) {
    throw std::invalid_argument("calibrate_pump: target must lie in (0, 1)");
  }
  d.validate();
  if (d.pump_rate_mhz <= 0) throw UnreachableTarget("calibrate_pump: pump_rate is zero", 1.0 / 3, 1.0 / 3);

  NVSystemParams zero_field = p;
  zero_field.b_gauss.setZero();
  zero_field.hyperfine = HyperfineTensor::axial(p.hyperfine.as_matrix()(2, 2), 0.0);

  // The reference model conserves nuclear populations; a finite nuclear T1 makes its
  // steady state unique and leaves the electron marginal unchanged.
  DissipationParams trial = d;
  if (!std::isfinite(trial.t1_nuclear_us)) trial.t1_nuclear_us = 1e3;
  auto polarization_at = [&](double leak) {
    trial.pump_leak_ratio = leak;
    return zero_field_electron_polarization(zero_field, trial);
  };

  // m_s = 0 population falls monotonically with the leak ratio.
  const double highest = polarization_at(0.0);
  const double lowest = polarization_at(1.0);
  constexpr double kSlack = 1e-9;
  if (target > highest + kSlack || target < lowest - kSlack) {
    std::ostringstream msg;
    msg << "calibrate_pump: target electron polarization " << target
        << " unreachable; attainable range [" << lowest << ", " << highest << "]";
    throw UnreachableTarget(msg.str(), lowest, highest);
  }

  double lo = 0.0, hi = 1.0;
  double best_leak = 0.0;
  double best_err = std::abs(highest - target);
  if (std::abs(lowest - target) < best_err) {
    best_leak = 1.0;
    best_err = std::abs(lowest - target);
  }
  for (int iter = 0; iter < 60 && best_err > 1e-6; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double pe = polarization_at(mid);
    if (std::abs(pe - target) < best_err) {
      best_err = std::abs(pe - target);
      best_leak = mid;
    }
    if (pe > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  DissipationParams out = d;
  out.pump_leak_ratio = best_leak;
  return out;
}

}  // namespace nvpol
