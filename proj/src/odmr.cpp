#include "nvpol/odmr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "nvpol/lsq.hpp"

namespace nvpol {

OdmrSpectrum::OdmrSpectrum(std::vector<double> frequency_mhz, std::vector<double> contrast)
    : frequency_(std::move(frequency_mhz)), contrast_(std::move(contrast)) {
  if (frequency_.size() != contrast_.size()) {
    throw SpectrumError("spectrum: frequency and contrast lengths differ");
  }
  if (frequency_.size() < kMinPoints) {
    std::ostringstream msg;
    msg << "spectrum: need at least " << kMinPoints << " points, got " << frequency_.size();
    throw SpectrumError(msg.str());
  }
  for (std::size_t k = 0; k < frequency_.size(); ++k) {
    if (!std::isfinite(frequency_[k]) || !std::isfinite(contrast_[k])) {
      throw SpectrumError("spectrum: non-finite value at row " + std::to_string(k));
    }
    if (k > 0 && !(frequency_[k] > frequency_[k - 1])) {
      throw SpectrumError("spectrum: frequencies must be strictly increasing (row " +
                          std::to_string(k) + ")");
    }
  }
}

void PeakSet::validate() const {
  if (peaks.empty()) throw std::invalid_argument("peak set is empty");
  for (const auto& p : peaks) {
    if (!(p.fwhm_mhz > 0)) throw std::invalid_argument("peak fwhm must be positive");
    if (!(p.amplitude >= 0)) throw std::invalid_argument("peak amplitude must be >= 0");
  }
}

double lorentzian(double f, const LorentzianPeak& p) {
  const double g = 0.5 * p.fwhm_mhz;
  const double u = f - p.center_mhz;
  return p.amplitude * g * g / (u * u + g * g);
}

std::vector<double> evaluate_peaks(const PeakSet& ps, const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), ps.baseline);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (const auto& p : ps.peaks) out[k] += lorentzian(grid[k], p);
  }
  return out;
}

OdmrSpectrum model_spectrum(const PeakSet& ps, const std::vector<double>& grid) {
  ps.validate();
  return OdmrSpectrum(grid, evaluate_peaks(ps, grid));
}

Eigen::MatrixXd peak_jacobian(const PeakSet& ps, const std::vector<double>& grid) {
  const int m = static_cast<int>(grid.size());
  Eigen::MatrixXd jac(m, 1 + 3 * ps.peaks.size());
  jac.col(0).setOnes();
  for (std::size_t j = 0; j < ps.peaks.size(); ++j) {
    const auto& p = ps.peaks[j];
    const double g = 0.5 * p.fwhm_mhz;
    for (int k = 0; k < m; ++k) {
      const double u = grid[k] - p.center_mhz;
      const double d = u * u + g * g;
      jac(k, 1 + 3 * j) = p.amplitude * g * g * 2.0 * u / (d * d);
      jac(k, 2 + 3 * j) = p.amplitude * g * u * u / (d * d);
      jac(k, 3 + 3 * j) = g * g / d;
    }
  }
  return jac;
}

namespace {

PeakSet unpack(const Eigen::VectorXd& x) {
  PeakSet ps;
  ps.baseline = x(0);
  const int n = static_cast<int>((x.size() - 1) / 3);
  for (int j = 0; j < n; ++j) ps.peaks.push_back({x(1 + 3 * j), x(2 + 3 * j), x(3 + 3 * j)});
  return ps;
}

Eigen::VectorXd pack(const PeakSet& ps) {
  Eigen::VectorXd x(1 + 3 * ps.peaks.size());
  x(0) = ps.baseline;
  for (std::size_t j = 0; j < ps.peaks.size(); ++j) {
    x(1 + 3 * j) = ps.peaks[j].center_mhz;
    x(2 + 3 * j) = ps.peaks[j].fwhm_mhz;
    x(3 + 3 * j) = ps.peaks[j].amplitude;
  }
  return x;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

PeakSet seed_peaks(const OdmrSpectrum& data, int n_peaks) {
  const auto& f = data.frequency();
  const auto& c = data.contrast();
  const int m = static_cast<int>(data.size());
  const double span = f.back() - f.front();

  PeakSet ps;
  ps.baseline = median(c);
  const double width = span / (4.0 * n_peaks);

  // topographic prominence of interior local maxima
  std::vector<std::pair<double, int>> candidates;
  for (int i = 1; i + 1 < m; ++i) {
    if (!(c[i] >= c[i - 1] && c[i] > c[i + 1])) continue;
    double left_min = c[i];
    for (int j = i - 1; j >= 0 && c[j] <= c[i]; --j) left_min = std::min(left_min, c[j]);
    double right_min = c[i];
    for (int j = i + 1; j < m && c[j] <= c[i]; ++j) right_min = std::min(right_min, c[j]);
    candidates.emplace_back(c[i] - std::max(left_min, right_min), i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const double max_c = *std::max_element(c.begin(), c.end());
  const double floor_amp = 1e-3 * std::max(max_c - ps.baseline, 1e-12);
  std::vector<int> chosen;
  for (const auto& [prominence, i] : candidates) {
    if (static_cast<int>(chosen.size()) == n_peaks) break;
    chosen.push_back(i);
  }
  // Not enough maxima: take the highest remaining points away from existing seeds.
  while (static_cast<int>(chosen.size()) < n_peaks) {
    int best = -1;
    for (int i = 0; i < m; ++i) {
      const bool near = std::any_of(chosen.begin(), chosen.end(),
                                    [&](int j) { return std::abs(f[i] - f[j]) < width; });
      if (!near && (best < 0 || c[i] > c[best])) best = i;
    }
    if (best < 0) {
      // grid exhausted; spread the rest evenly
      const int k = static_cast<int>(chosen.size());
      best = std::clamp(static_cast<int>((k + 0.5) * m / n_peaks), 0, m - 1);
    }
    chosen.push_back(best);
  }
  for (int i : chosen) {
    ps.peaks.push_back({f[i], width, std::max(c[i] - ps.baseline, floor_amp)});
  }
  return ps;
}

PeakSet PeakFitResult::peak_set() const {
  PeakSet ps;
  ps.baseline = baseline;
  for (const auto& p : peaks) ps.peaks.push_back(p.peak);
  return ps;
}

bool PeakFitResult::any_pinned() const {
  return std::any_of(peaks.begin(), peaks.end(), [](const auto& p) { return p.pinned_at_zero; });
}

PeakFitResult fit_spectrum(const OdmrSpectrum& data, int n_peaks, const std::optional<PeakSet>& init,
                           const PeakFitOptions& options) {
  if (n_peaks < 1) throw std::invalid_argument("fit_spectrum: n_peaks must be >= 1");
  if (static_cast<int>(data.size()) <= 3 * n_peaks + 1) {
    throw SpectrumError("fit_spectrum: too few points for the requested peak count");
  }
  PeakSet start = init ? *init : seed_peaks(data, n_peaks);
  if (static_cast<int>(start.peaks.size()) != n_peaks) {
    throw std::invalid_argument("fit_spectrum: initial peak set size differs from n_peaks");
  }
  start.validate();

  const auto& grid = data.frequency();
  const Eigen::Map<const Eigen::VectorXd> y(data.contrast().data(),
                                            static_cast<Eigen::Index>(data.size()));
  double min_step = grid[1] - grid[0];
  for (std::size_t k = 2; k < grid.size(); ++k) min_step = std::min(min_step, grid[k] - grid[k - 1]);

  const int np = 1 + 3 * n_peaks;
  LsqProblem problem;
  problem.residuals = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const auto model = evaluate_peaks(unpack(x), grid);
    return Eigen::Map<const Eigen::VectorXd>(model.data(), static_cast<Eigen::Index>(model.size())) - y;
  };
  problem.jacobian = [&](const Eigen::VectorXd& x) { return peak_jacobian(unpack(x), grid); };
  problem.lower = Eigen::VectorXd::Constant(np, -std::numeric_limits<double>::infinity());
  for (int j = 0; j < n_peaks; ++j) {
    problem.lower(2 + 3 * j) = 1e-3 * min_step;
    problem.lower(3 + 3 * j) = 0.0;
  }

  LsqOptions lsq_options;
  lsq_options.max_iterations = options.max_iterations;
  const LsqResult fit = damped_least_squares(problem, pack(start), lsq_options);

  PeakFitResult out;
  out.baseline = fit.x(0);
  out.baseline_uncertainty = fit.uncertainty(0);
  out.residual_norm = fit.residual_norm;
  out.iterations = fit.iterations;
  out.converged = fit.converged;

  double max_amp = 0.0;
  for (int j = 0; j < n_peaks; ++j) max_amp = std::max(max_amp, fit.x(3 + 3 * j));
  for (int j = 0; j < n_peaks; ++j) {
    FittedPeak fp;
    fp.peak = {fit.x(1 + 3 * j), fit.x(2 + 3 * j), fit.x(3 + 3 * j)};
    fp.uncertainty = {fit.uncertainty(1 + 3 * j), fit.uncertainty(2 + 3 * j),
                      fit.uncertainty(3 + 3 * j)};
    fp.pinned_at_zero = fit.at_lower[3 + 3 * j] || fp.peak.amplitude <= options.pinned_fraction * max_amp;
    out.peaks.push_back(fp);
  }
  std::stable_sort(out.peaks.begin(), out.peaks.end(), [](const auto& a, const auto& b) {
    return a.peak.center_mhz < b.peak.center_mhz;
  });
  return out;
}

PolarizationEstimate polarization_from_amplitudes(const std::vector<double>& amplitudes,
                                                  const std::vector<double>& m_values,
                                                  SpinQuantumNumber nuclear_spin,
                                                  const std::vector<double>& amplitude_sigma) {
  if (amplitudes.size() != m_values.size() || amplitudes.empty()) {
    throw std::invalid_argument("polarization: amplitudes and m values must have equal, nonzero length");
  }
  if (!amplitude_sigma.empty() && amplitude_sigma.size() != amplitudes.size()) {
    throw std::invalid_argument("polarization: uncertainty list length mismatch");
  }
  const double spin = nuclear_spin.value();
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    if (!(amplitudes[i] >= 0)) throw std::invalid_argument("polarization: negative amplitude");
    if (std::abs(m_values[i]) > spin + 1e-12) {
      throw std::invalid_argument("polarization: |m| exceeds the nuclear spin");
    }
    total += amplitudes[i];
    weighted += m_values[i] * amplitudes[i];
  }
  if (!(total > 0)) throw std::invalid_argument("polarization: all amplitudes are zero");

  PolarizationEstimate est;
  est.p = weighted / (spin * total);
  double var = 0.0;
  for (std::size_t i = 0; i < amplitude_sigma.size(); ++i) {
    const double dp = (m_values[i] - spin * est.p) / (spin * total);
    var += dp * dp * amplitude_sigma[i] * amplitude_sigma[i];
  }
  est.uncertainty = std::sqrt(var);
  return est;
}

std::vector<double> esodmr_profile(const StrainDistribution& dist, double d_es_mhz,
                                   double natural_fwhm_mhz, const std::vector<double>& grid) {
  dist.validate();
  if (!(natural_fwhm_mhz > 0)) throw std::invalid_argument("esodmr: natural_fwhm must be positive");

  // Trapezoid rule in the standardized variable; the step resolves the
  // Lorentzian once sigma exceeds the natural width.
  std::vector<double> strain{dist.mean_mhz};
  std::vector<double> weight{1.0};
  if (dist.sigma_mhz > 0) {
    constexpr double kReach = 7.0;
    const double dz = std::min(0.25, natural_fwhm_mhz / (4.0 * dist.sigma_mhz));
    const int half = static_cast<int>(std::ceil(kReach / dz));
    strain.clear();
    weight.clear();
    double sum = 0.0;
    for (int k = -half; k <= half; ++k) {
      const double z = k * dz;
      strain.push_back(dist.mean_mhz + dist.sigma_mhz * z);
      weight.push_back(std::exp(-0.5 * z * z));
      sum += weight.back();
    }
    for (double& w : weight) w /= sum;
  }

  const double g2 = 0.25 * natural_fwhm_mhz * natural_fwhm_mhz;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i] - d_es_mhz;
    double acc = 0.0;
    for (std::size_t k = 0; k < strain.size(); ++k) {
      const double up = x - strain[k];
      const double down = x + strain[k];
      acc += weight[k] * (g2 / (up * up + g2) + g2 / (down * down + g2));
    }
    out[i] = 0.5 * acc;
  }
  return out;
}

OdmrSpectrum esodmr_lineshape(const StrainDistribution& dist, double d_es_mhz,
                              double natural_fwhm_mhz, const std::vector<double>& grid) {
  return OdmrSpectrum(grid, esodmr_profile(dist, d_es_mhz, natural_fwhm_mhz, grid));
}

std::optional<double> full_width_half_max(const std::vector<double>& freq,
                                          const std::vector<double>& height) {
  if (freq.size() != height.size() || freq.size() < 3) return std::nullopt;
  const auto peak_it = std::max_element(height.begin(), height.end());
  const double peak = *peak_it;
  if (!(peak > 0)) return std::nullopt;
  const double half = 0.5 * peak;
  const std::size_t k = static_cast<std::size_t>(peak_it - height.begin());

  auto crossing = [&](std::size_t inner, std::size_t outer) {
    const double t = (height[inner] - half) / (height[inner] - height[outer]);
    return freq[inner] + t * (freq[outer] - freq[inner]);
  };
  std::optional<double> left, right;
  for (std::size_t j = k; j > 0; --j) {
    if (height[j - 1] < half) {
      left = crossing(j, j - 1);
      break;
    }
  }
  for (std::size_t j = k; j + 1 < height.size(); ++j) {
    if (height[j + 1] < half) {
      right = crossing(j, j + 1);
      break;
    }
  }
  if (!left || !right) return std::nullopt;
  return *right - *left;
}

namespace {

// Integral of the piecewise-linear interpolant over [lo, hi].
double integrate_linear(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi) {
  auto value_at = [&](double t) {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
    const double s = (t - x[j - 1]) / (x[j] - x[j - 1]);
    return y[j - 1] + s * (y[j] - y[j - 1]);
  };
  double acc = 0.0;
  double prev_x = lo;
  double prev_y = value_at(lo);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] <= lo) continue;
    if (x[j] >= hi) break;
    acc += 0.5 * (prev_y + y[j]) * (x[j] - prev_x);
    prev_x = x[j];
    prev_y = y[j];
  }
  acc += 0.5 * (prev_y + value_at(hi)) * (hi - prev_x);
  return acc;
}

}  // namespace

ResonanceMetric resonance_metric(const OdmrSpectrum& data, std::pair<double, double> central_range,
                                 std::optional<double> baseline) {
  const auto& f = data.frequency();
  const auto& c = data.contrast();
  const auto [lo, hi] = central_range;
  if (!(lo < hi) || lo < f.front() || hi > f.back()) {
    throw SpectrumError("resonance_metric: central range must lie inside the data span");
  }

  ResonanceMetric out;
  if (baseline) {
    out.baseline = *baseline;
  } else {
    const std::size_t edge = std::max<std::size_t>(1, c.size() / 20);
    double sum = 0.0;
    for (std::size_t k = 0; k < edge; ++k) sum += c[k] + c[c.size() - 1 - k];
    out.baseline = sum / (2.0 * edge);
  }
  std::vector<double> height(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) height[k] = c[k] - out.baseline;

  out.mean_contrast = integrate_linear(f, height, lo, hi) / (hi - lo);
  const auto width = full_width_half_max(f, height);
  if (!width) {
    out.flagged = true;
    return out;
  }
  out.fwhm_mhz = *width;
  out.value = out.mean_contrast * out.fwhm_mhz;
  return out;
}

StrainFitResult fit_strain_distribution(const OdmrSpectrum& data, double d_es_mhz,
                                        double natural_fwhm_mhz, const StrainFitOptions& options) {
  if (!(natural_fwhm_mhz > 0)) throw std::invalid_argument("fit_strain: natural_fwhm must be positive");
  const auto [w_lo, w_hi] = options.window_mhz.value_or(std::pair{1000.0, 1800.0});
  std::vector<double> grid, y;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (data.frequency()[k] >= w_lo && data.frequency()[k] <= w_hi) {
      grid.push_back(data.frequency()[k]);
      y.push_back(data.contrast()[k]);
    }
  }
  if (grid.size() < OdmrSpectrum::kMinPoints) {
    throw SpectrumError("fit_strain: fewer than 8 points inside the fit window");
  }
  const Eigen::Map<const Eigen::VectorXd> target(y.data(), static_cast<Eigen::Index>(y.size()));

  StrainFitResult out;
  out.d_es_mhz = d_es_mhz;
  const double peak = *std::max_element(y.begin(), y.end());

  // sigma seed from the Voigt width relation
  double sigma0 = 10.0;
  if (const auto w = full_width_half_max(grid, y); w && peak > 0) {
    const double lw = natural_fwhm_mhz;
    const double gauss_part = std::pow(*w - 0.5346 * lw, 2) - 0.2166 * lw * lw;
    if (gauss_part > 0) sigma0 = std::sqrt(gauss_part) / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    sigma0 = std::max(sigma0, 0.05 * lw);
  }
  auto shape = [&](double sigma, double d) {
    StrainDistribution dist{0.0, std::max(sigma, 0.0), 32};
    return esodmr_profile(dist, d, natural_fwhm_mhz, grid);
  };
  const auto shape0 = shape(sigma0, d_es_mhz);
  const double amp0 = peak > 0 ? peak / *std::max_element(shape0.begin(), shape0.end()) : 0.0;

  const int np = options.fit_d_es ? 3 : 2;
  LsqProblem problem;
  problem.residuals = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const auto s = shape(x(1), options.fit_d_es ? x(2) : d_es_mhz);
    Eigen::VectorXd r(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) r(k) = x(0) * s[k] - y[k];
    return r;
  };
  problem.lower = Eigen::VectorXd::Constant(np, -std::numeric_limits<double>::infinity());
  problem.lower(0) = 0.0;
  problem.lower(1) = 0.0;

  Eigen::VectorXd x0(np);
  x0(0) = amp0;
  x0(1) = sigma0;
  if (options.fit_d_es) x0(2) = d_es_mhz;

  LsqOptions lsq_options;
  lsq_options.max_iterations = options.max_iterations;
  const LsqResult fit = damped_least_squares(problem, x0, lsq_options);

  out.amplitude = fit.x(0);
  out.amplitude_uncertainty = fit.uncertainty(0);
  out.strain = StrainDistribution{0.0, fit.x(1), 32};
  out.sigma_uncertainty = fit.uncertainty(1);
  if (options.fit_d_es) {
    out.d_es_mhz = fit.x(2);
    out.d_es_uncertainty = fit.uncertainty(2);
  }
  out.residual_norm = fit.residual_norm;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  out.sigma_pinned_at_zero = fit.at_lower[1];
  const double scale = std::max(std::abs(peak), target.cwiseAbs().maxCoeff());
  out.identifiable = out.amplitude > 1e-9 * std::max(scale, 1e-300) && peak > 0;
  return out;
}

}  // namespace nvpol
