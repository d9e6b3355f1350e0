#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvpol/spinops.hpp"
#include "nvpol/sweep.hpp"

namespace nvpol {

class SpectrumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Contrast is stored as a positive dip depth (fractional fluorescence change).
class OdmrSpectrum {
 public:
  static constexpr std::size_t kMinPoints = 8;

  // Throws SpectrumError unless lengths match, n >= 8 and frequencies strictly increase.
  OdmrSpectrum(std::vector<double> frequency_mhz, std::vector<double> contrast);

  std::size_t size() const { return frequency_.size(); }
  const std::vector<double>& frequency() const { return frequency_; }
  const std::vector<double>& contrast() const { return contrast_; }

 private:
  std::vector<double> frequency_;
  std::vector<double> contrast_;
};

struct LorentzianPeak {
  double center_mhz = 0.0;
  double fwhm_mhz = 1.0;
  double amplitude = 0.0;
};

struct PeakSet {
  std::vector<LorentzianPeak> peaks;
  double baseline = 0.0;

  void validate() const;
};

double lorentzian(double f, const LorentzianPeak& p);

std::vector<double> evaluate_peaks(const PeakSet& ps, const std::vector<double>& grid);
OdmrSpectrum model_spectrum(const PeakSet& ps, const std::vector<double>& grid);

// d(model)/d(params) for params ordered [baseline, c1, w1, a1, c2, w2, a2, ...].
Eigen::MatrixXd peak_jacobian(const PeakSet& ps, const std::vector<double>& grid);

struct PeakFitOptions {
  int max_iterations = 200;
  // amplitude below this fraction of the largest amplitude counts as pinned at zero
  double pinned_fraction = 1e-6;
};

struct FittedPeak {
  LorentzianPeak peak;
  LorentzianPeak uncertainty;
  bool pinned_at_zero = false;
};

struct PeakFitResult {
  std::vector<FittedPeak> peaks;  // sorted by center
  double baseline = 0.0;
  double baseline_uncertainty = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;

  PeakSet peak_set() const;
  bool any_pinned() const;
};

// Seeds from the n most prominent local maxima when `init` is absent.
PeakFitResult fit_spectrum(const OdmrSpectrum& data, int n_peaks,
                           const std::optional<PeakSet>& init = std::nullopt,
                           const PeakFitOptions& options = {});

PeakSet seed_peaks(const OdmrSpectrum& data, int n_peaks);

struct PolarizationEstimate {
  double p = 0.0;
  double uncertainty = 0.0;
};

// P = sum_i m_i a_i / (I sum_i a_i), first-order propagated uncertainty.
PolarizationEstimate polarization_from_amplitudes(const std::vector<double>& amplitudes,
                                                  const std::vector<double>& m_values,
                                                  SpinQuantumNumber nuclear_spin,
                                                  const std::vector<double>& amplitude_sigma = {});

// Zero-field excited-state resonance: branches at d_es +/- E, E ~ Normal(mean, sigma),
// each a unit-height Lorentzian of width natural_fwhm, averaged over E.
std::vector<double> esodmr_profile(const StrainDistribution& dist, double d_es_mhz,
                                   double natural_fwhm_mhz, const std::vector<double>& grid);
OdmrSpectrum esodmr_lineshape(const StrainDistribution& dist, double d_es_mhz,
                              double natural_fwhm_mhz, const std::vector<double>& grid);

struct StrainFitOptions {
  bool fit_d_es = false;
  int max_iterations = 200;
  std::optional<std::pair<double, double>> window_mhz;  // default 1000-1800
};

struct StrainFitResult {
  StrainDistribution strain;  // mean fixed at 0
  double sigma_uncertainty = 0.0;
  double amplitude = 0.0;
  double amplitude_uncertainty = 0.0;
  double d_es_mhz = 0.0;
  double d_es_uncertainty = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool sigma_pinned_at_zero = false;
  bool identifiable = true;  // false when the resonance has vanished
};

StrainFitResult fit_strain_distribution(const OdmrSpectrum& data, double d_es_mhz,
                                        double natural_fwhm_mhz,
                                        const StrainFitOptions& options = {});

// Half-maximum width by linear interpolation around the global maximum;
// nullopt when the trace never falls below half maximum on both sides.
std::optional<double> full_width_half_max(const std::vector<double>& freq,
                                          const std::vector<double>& height);

struct ResonanceMetric {
  double value = 0.0;
  double mean_contrast = 0.0;
  double fwhm_mhz = 0.0;
  double baseline = 0.0;
  bool flagged = false;  // no half-maximum crossing
};

// (mean baseline-subtracted contrast over central_range) x FWHM of the trace.
// Baseline defaults to the mean of the outermost 5% of points on each side.
ResonanceMetric resonance_metric(const OdmrSpectrum& data, std::pair<double, double> central_range,
                                 std::optional<double> baseline = std::nullopt);

}  // namespace nvpol
