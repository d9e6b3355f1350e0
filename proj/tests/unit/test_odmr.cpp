#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nvpol/lsq.hpp"
#include "nvpol/odmr.hpp"

using namespace nvpol;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = a + (b - a) * k / (n - 1);
  return g;
}

PeakSet triplet(double amp = 1.0) {
  PeakSet ps;
  for (double c : {-2.16, 0.0, 2.16}) ps.peaks.push_back({c, 1.0, amp});
  return ps;
}

OdmrSpectrum with_noise(const PeakSet& ps, const std::vector<double>& grid, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  auto y = evaluate_peaks(ps, grid);
  for (double& v : y) v += g(rng);
  return OdmrSpectrum(grid, y);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("spectrum validation") {
  CHECK_THROWS_AS(OdmrSpectrum(linspace(0, 1, 7), std::vector<double>(7, 0.0)), SpectrumError);
  CHECK_THROWS_AS(OdmrSpectrum(linspace(0, 1, 9), std::vector<double>(8, 0.0)), SpectrumError);
  auto f = linspace(0, 1, 9);
  f[4] = f[3];
  CHECK_THROWS_AS(OdmrSpectrum(f, std::vector<double>(9, 0.0)), SpectrumError);
  std::vector<double> c(9, 0.0);
  c[2] = std::nan("");
  CHECK_THROWS_AS(OdmrSpectrum(linspace(0, 1, 9), c), SpectrumError);
  CHECK_NOTHROW(OdmrSpectrum(linspace(0, 1, 8), std::vector<double>(8, 0.0)));
}

TEST_CASE("Lorentzian model values") {
  PeakSet ps{{{10.0, 2.0, 0.3}}, 0.05};
  const auto y = evaluate_peaks(ps, {10.0, 9.0, 11.0});
  CHECK(y[0] == doctest::Approx(0.35));
  CHECK(y[1] == doctest::Approx(0.05 + 0.15));
  CHECK(y[2] == doctest::Approx(0.05 + 0.15));

  PeakSet a{{{-3.0, 1.0, 0.2}}, 0.1}, b{{{4.0, 2.5, 0.7}}, 0.1}, both{{{-3.0, 1.0, 0.2}, {4.0, 2.5, 0.7}}, 0.1};
  const auto grid = linspace(-10, 10, 41);
  const auto ya = evaluate_peaks(a, grid), yb = evaluate_peaks(b, grid), yab = evaluate_peaks(both, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(yab[k] - (ya[k] + yb[k] - 0.1)) < 1e-15);

  CHECK_THROWS_AS((PeakSet{{{0, 0.0, 1}}, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PeakSet{{{0, 1.0, -1}}, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((PeakSet{{}, 0}.validate()), std::invalid_argument);
}

TEST_CASE("analytic peak Jacobian agrees with finite differences") {
  PeakSet ps{{{-1.0, 0.8, 0.4}, {2.5, 1.7, 1.1}}, 0.02};
  const auto grid = linspace(-6, 6, 61);
  auto pack = [](const PeakSet& s) {
    Eigen::VectorXd x(1 + 3 * s.peaks.size());
    x(0) = s.baseline;
    for (std::size_t j = 0; j < s.peaks.size(); ++j) {
      x(1 + 3 * j) = s.peaks[j].center_mhz;
      x(2 + 3 * j) = s.peaks[j].fwhm_mhz;
      x(3 + 3 * j) = s.peaks[j].amplitude;
    }
    return x;
  };
  auto model = [&](const Eigen::VectorXd& x) {
    PeakSet s;
    s.baseline = x(0);
    for (int j = 0; j < (x.size() - 1) / 3; ++j) s.peaks.push_back({x(1 + 3 * j), x(2 + 3 * j), x(3 + 3 * j)});
    const auto y = evaluate_peaks(s, grid);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(y.data(), y.size()));
  };
  const Eigen::MatrixXd num = numerical_jacobian(model, pack(ps));
  CHECK((num - peak_jacobian(ps, grid)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("noiseless single peak recovered to 1e-6") {
  PeakSet truth{{{1.3, 0.9, 0.42}}, 0.01};
  const auto grid = linspace(-5, 5, 201);
  const auto fit = fit_spectrum(model_spectrum(truth, grid), 1);
  CHECK(fit.converged);
  CHECK(rel(fit.peaks[0].peak.center_mhz, 1.3) < 1e-6);
  CHECK(rel(fit.peaks[0].peak.fwhm_mhz, 0.9) < 1e-6);
  CHECK(rel(fit.peaks[0].peak.amplitude, 0.42) < 1e-6);
  CHECK(rel(fit.baseline, 0.01) < 1e-6);
}

TEST_CASE("noiseless recovery for one to four separated peaks") {
  const double centers[] = {-9.0, -3.0, 2.5, 8.0};
  const double widths[] = {1.2, 0.8, 1.5, 1.0};
  const double amps[] = {0.5, 1.0, 0.3, 0.8};
  const auto grid = linspace(-14, 14, 561);
  for (int n = 1; n <= 4; ++n) {
    CAPTURE(n);
    PeakSet truth;
    truth.baseline = 0.02;
    for (int j = 0; j < n; ++j) truth.peaks.push_back({centers[j], widths[j], amps[j]});
    const auto fit = fit_spectrum(model_spectrum(truth, grid), n);
    REQUIRE(fit.peaks.size() == static_cast<std::size_t>(n));
    CHECK(fit.converged);
    for (int j = 0; j < n; ++j) {
      CHECK(rel(fit.peaks[j].peak.center_mhz, centers[j]) < 1e-6);
      CHECK(rel(fit.peaks[j].peak.fwhm_mhz, widths[j]) < 1e-6);
      CHECK(rel(fit.peaks[j].peak.amplitude, amps[j]) < 1e-6);
    }
  }
}

TEST_CASE("noisy triplet over 100 seeds") {
  const auto grid = linspace(-8, 8, 801);
  double worst_center = 0, worst_amp = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto fit = fit_spectrum(with_noise(triplet(), grid, 1.0 / 50, seed), 3);
    REQUIRE(fit.peaks.size() == 3);
    const double c[] = {-2.16, 0.0, 2.16};
    for (int j = 0; j < 3; ++j) {
      worst_center = std::max(worst_center, std::abs(fit.peaks[j].peak.center_mhz - c[j]));
      worst_amp = std::max(worst_amp, std::abs(fit.peaks[j].peak.amplitude - 1.0));
    }
  }
  CHECK(worst_center < 0.05);
  CHECK(worst_amp < 0.02);
}

TEST_CASE("surplus peak is pinned at zero amplitude") {
  const auto grid = linspace(-8, 8, 801);
  PeakSet init = triplet();
  init.peaks.push_back({6.0, 1.0, 0.1});
  const auto fit = fit_spectrum(model_spectrum(triplet(), grid), 4, init);
  REQUIRE(fit.peaks.size() == 4);
  CHECK(fit.any_pinned());
  const auto& extra = fit.peaks.back();
  CHECK(extra.pinned_at_zero);
  CHECK(extra.peak.amplitude < 1e-6);
}

TEST_CASE("fit preconditions") {
  const auto grid = linspace(-8, 8, 10);
  const auto s = model_spectrum(triplet(), grid);
  CHECK_THROWS_AS(fit_spectrum(s, 3), SpectrumError);
  CHECK_THROWS_AS(fit_spectrum(s, 0), std::invalid_argument);
}

TEST_CASE("polarization from amplitudes") {
  const auto one = SpinQuantumNumber::one();
  const std::vector<double> m{-1, 0, 1};
  CHECK(std::abs(polarization_from_amplitudes({1, 1, 1}, m, one).p) < 1e-15);
  CHECK(polarization_from_amplitudes({0, 0, 1}, m, one).p == 1.0);
  CHECK(polarization_from_amplitudes({1, 0, 0}, m, one).p == -1.0);
  CHECK(polarization_from_amplitudes({0.15, 0.85}, {-0.5, 0.5}, SpinQuantumNumber::half()).p ==
        doctest::Approx(0.70).epsilon(1e-14));

  const std::vector<double> a{0.23, 0.41, 0.97};
  const double base = polarization_from_amplitudes(a, m, one).p;
  for (double s : {1e-3, 0.5, 3.0, 1e4}) {
    std::vector<double> scaled;
    for (double v : a) scaled.push_back(s * v);
    CHECK(std::abs(polarization_from_amplitudes(scaled, m, one).p - base) <= 4 * 1e-16);
  }

  CHECK_THROWS_AS(polarization_from_amplitudes({0, 0, 0}, m, one), std::invalid_argument);
  CHECK_THROWS_AS(polarization_from_amplitudes({1, 1}, m, one), std::invalid_argument);
  CHECK_THROWS_AS(polarization_from_amplitudes({1, 1, 1}, {-2, 0, 2}, one), std::invalid_argument);
}

TEST_CASE("polarization uncertainty is first-order propagation") {
  const auto one = SpinQuantumNumber::one();
  const std::vector<double> m{-1, 0, 1}, a{0.2, 0.3, 0.9}, sd{0.01, 0.02, 0.015};
  const auto est = polarization_from_amplitudes(a, m, one, sd);
  double var = 0;
  for (int j = 0; j < 3; ++j) {
    auto up = a, dn = a;
    const double h = 1e-6;
    up[j] += h;
    dn[j] -= h;
    const double d = (polarization_from_amplitudes(up, m, one).p - polarization_from_amplitudes(dn, m, one).p) / (2 * h);
    var += d * d * sd[j] * sd[j];
  }
  CHECK(est.uncertainty == doctest::Approx(std::sqrt(var)).epsilon(1e-6));
}

TEST_CASE("ESODMR lineshape limits") {
  const auto grid = linspace(1000, 1800, 1601);
  const auto y = esodmr_profile({0, 0, 32}, 1400, 10, grid);
  PeakSet single{{{1400, 10, 1.0}}, 0};
  const auto ref = evaluate_peaks(single, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-14);

  const auto split = esodmr_profile({50, 0, 32}, 1400, 10, grid);
  PeakSet two{{{1350, 10, 0.5}, {1450, 10, 0.5}}, 0};
  const auto ref2 = evaluate_peaks(two, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(split[k] - ref2[k]) < 1e-14);
}

TEST_CASE("ESODMR width grows with strain spread") {
  const auto grid = linspace(600, 2200, 6401);
  double prev = 0;
  for (double sigma : {0.0, 10.0, 30.0, 100.0}) {
    CAPTURE(sigma);
    const auto w = full_width_half_max(grid, esodmr_profile({0, sigma, 32}, 1400, 10, grid));
    REQUIRE(w);
    CHECK(*w >= prev);
    prev = *w;
  }
  CHECK(prev > 100);
}

TEST_CASE("noiseless strain fit is the identity on sigma") {
  const auto grid = linspace(1000, 1800, 1601);
  for (double sigma : {5.0, 10.0, 20.0, 50.0, 100.0, 200.0}) {
    CAPTURE(sigma);
    auto y = esodmr_profile({0, sigma, 32}, 1400, 10, grid);
    for (double& v : y) v *= 0.03;
    const auto fit = fit_strain_distribution(OdmrSpectrum(grid, y), 1400, 10);
    CHECK(fit.converged);
    CHECK(rel(fit.strain.sigma_mhz, sigma) < 0.01);
    CHECK(rel(fit.amplitude, 0.03) < 0.01);
    CHECK(fit.strain.mean_mhz == 0.0);
  }
}

TEST_CASE("strain fit with free zero-field splitting") {
  const auto grid = linspace(1000, 1800, 1601);
  auto y = esodmr_profile({0, 40, 32}, 1412, 10, grid);
  StrainFitOptions opt;
  opt.fit_d_es = true;
  const auto fit = fit_strain_distribution(OdmrSpectrum(grid, y), 1400, 10, opt);
  CHECK(fit.d_es_mhz == doctest::Approx(1412).epsilon(1e-6));
  CHECK(fit.strain.sigma_mhz == doctest::Approx(40).epsilon(1e-3));
}

TEST_CASE("noisy strain fit stays within 10 percent") {
  const auto grid = linspace(1000, 1800, 1601);
  for (double sigma : {5.0, 50.0, 200.0}) {
    CAPTURE(sigma);
    const auto clean = esodmr_profile({0, sigma, 32}, 1400, 10, grid);
    const double peak = *std::max_element(clean.begin(), clean.end());
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> g(0.0, 0.02 * peak);
      auto y = clean;
      for (double& v : y) v += g(rng);
      const auto fit = fit_strain_distribution(OdmrSpectrum(grid, y), 1400, 10);
      worst = std::max(worst, rel(fit.strain.sigma_mhz, sigma));
    }
    CHECK(worst < 0.10);
  }
}

TEST_CASE("flat spectrum leaves the strain unidentifiable") {
  const auto grid = linspace(1000, 1800, 401);
  const auto fit = fit_strain_distribution(OdmrSpectrum(grid, std::vector<double>(grid.size(), 0.0)), 1400, 10);
  CHECK_FALSE(fit.identifiable);
  CHECK(std::abs(fit.amplitude) < 1e-12);
}

TEST_CASE("full width at half maximum of a sampled Lorentzian") {
  const auto grid = linspace(-50, 50, 20001);
  const auto y = evaluate_peaks(PeakSet{{{3.0, 4.0, 2.0}}, 0}, grid);
  const auto w = full_width_half_max(grid, y);
  REQUIRE(w);
  CHECK(*w == doctest::Approx(4.0).epsilon(1e-6));
  CHECK_FALSE(full_width_half_max(grid, std::vector<double>(grid.size(), 0.0)));
}

TEST_CASE("resonance metric against the closed-form Lorentzian mean") {
  const double c = 1410, w = 30, a = 0.04;
  const auto grid = linspace(1000, 1800, 160001);
  const auto s = model_spectrum(PeakSet{{{c, w, a}}, 0}, grid);
  const auto m = resonance_metric(s, {c - w / 10, c + w / 10}, 0.0);
  // mean of a / (1 + (2x/w)^2) over |x| < w/10 is a * 5 * atan(0.2)
  const double mean = a * 5 * std::atan(0.2);
  CHECK(m.mean_contrast == doctest::Approx(mean).epsilon(1e-8));
  CHECK(m.fwhm_mhz == doctest::Approx(w).epsilon(1e-6));
  CHECK(m.value == doctest::Approx(mean * w).epsilon(1e-6));
  CHECK_FALSE(m.flagged);
}

TEST_CASE("resonance metric scaling, baseline and degenerate input") {
  const auto grid = linspace(1000, 1800, 1601);
  auto y = esodmr_profile({0, 60, 32}, 1400, 10, grid);
  for (double& v : y) v *= 0.02;
  const auto base = resonance_metric(OdmrSpectrum(grid, y), {1380, 1440});

  auto doubled = y;
  for (double& v : doubled) v *= 2;
  const auto twice = resonance_metric(OdmrSpectrum(grid, doubled), {1380, 1440});
  CHECK(twice.value == doctest::Approx(2 * base.value).epsilon(1e-12));
  CHECK(twice.fwhm_mhz == doctest::Approx(base.fwhm_mhz).epsilon(1e-12));

  for (double offset : {-0.3, 0.05, 1.7}) {
    auto shifted = y;
    for (double& v : shifted) v += offset;
    CHECK(resonance_metric(OdmrSpectrum(grid, shifted), {1380, 1440}).value ==
          doctest::Approx(base.value).epsilon(1e-9));
  }

  const auto zero = resonance_metric(OdmrSpectrum(grid, std::vector<double>(grid.size(), 0.0)), {1380, 1440});
  CHECK(zero.value == 0.0);
  CHECK(zero.flagged);
  CHECK_THROWS_AS(resonance_metric(OdmrSpectrum(grid, y), {900, 1440}), SpectrumError);
}
