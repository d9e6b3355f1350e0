// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "nvpol/commands.hpp"
#include "nvpol/model.hpp"
#include "nvpol/odmr.hpp"
#include "nvpol/solver.hpp"
#include "nvpol/sweep.hpp"

using namespace nvpol;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

using Check = std::function<void(Verdict&)>;

bool run_criterion(int id, const std::string& title, double budget_s, const Check& check) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    check(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (elapsed > budget_s) {
    v.pass = false;
    v.detail << " [runtime " << elapsed << " s exceeds " << budget_s << " s]";
  }
  std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << id << ". " << title << ":" << v.detail.str() << " ("
            << std::fixed << std::setprecision(2) << elapsed << " s)" << std::defaultfloat << std::endl;
  return v.pass;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = a + (b - a) * k / (n - 1);
  return g;
}

OperatorMatrix random_matrix(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  OperatorMatrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = cplx(g(rng), g(rng));
  return m;
}

const DissipationParams& calibrated() {
  static const DissipationParams d = calibrate_pump(0.8, DissipationParams{}, NVSystemParams{});
  return d;
}

SweepSpec field_spec(double start, double stop, int count) {
  SweepSpec s;
  s.dissipation = calibrated();
  s.axis1 = {SweepParameter::BAxialGauss, start, stop, count};
  return s;
}

void hamiltonian_spectrum(Verdict& v) {
  NVSystemParams p;
  p.hyperfine = HyperfineTensor::axial(0, 0);
  p.gamma_n_mhz_per_gauss = 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(build_hamiltonian(p));
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + 9);
  std::sort(ev.begin(), ev.end());
  const double low = -1400.0 * 2 / 3, high = 1400.0 / 3;
  double worst = 0;
  for (int k = 0; k < 9; ++k) worst = std::max(worst, std::abs(ev[k] - (k < 3 ? low : high)) / std::abs(k < 3 ? low : high));
  v.detail << " eigenvalues {" << ev[0] << ", " << ev[3] << ", " << ev[8] << "} MHz, rel err " << worst;
  v.require(worst < 1e-6, "eigenvalues within 1e-6 relative");

  const double step = 0.1;
  double crossing = NAN, prev = NAN;
  for (double b = 0; b <= 1000; b += step) {
    p.b_gauss = Eigen::Vector3d(0, 0, b);
    const auto h = build_hamiltonian(p);
    const double gap = h(3, 3).real() - h(6, 6).real();
    if (prev < 0 && gap >= 0) {
      crossing = b;
      break;
    }
    prev = gap;
  }
  const double expected = p.d_es_mhz / p.gamma_e_mhz_per_gauss;
  v.detail << "; crossing " << crossing << " G vs " << expected << " G";
  v.require(std::abs(crossing - expected) <= step, "crossing within one grid step of d_es/gamma_e");
  v.require(std::abs(expected - 499.6) < 0.05, "d_es/gamma_e = 499.6 G");
}

void lindblad_correctness(Verdict& v) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> rate(0.2, 2.0);
  double worst_residual = 0, worst_oracle = 0, worst_herm = 0, worst_trace = 0, min_eig = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const OperatorMatrix a = random_matrix(n, rng, 0.5);
    const OperatorMatrix h = 0.5 * (a + a.adjoint());
    std::vector<CollapseChannel> cs;
    for (int k = 0; k < 1 + trial % 3; ++k) {
      OperatorMatrix c = random_matrix(n, rng, 1.0);
      cs.push_back({c / c.norm(), rate(rng), "random"});
    }
    const auto l = liouvillian(h, cs);
    const auto ss = steady_state(l);
    const auto& rho = ss.rho.matrix();
    worst_residual = std::max(worst_residual, ss.residual_norm);
    worst_herm = std::max(worst_herm, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
    worst_trace = std::max(worst_trace, std::abs(rho.trace() - cplx(1)));
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(rho).eigenvalues().minCoeff());

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ev(l.matrix, false);
    double slowest = INFINITY;
    const double scale = l.matrix.cwiseAbs().maxCoeff();
    for (int k = 0; k < ev.eigenvalues().size(); ++k) {
      if (std::abs(ev.eigenvalues()(k)) > 1e-9 * scale) slowest = std::min(slowest, -ev.eigenvalues()(k).real());
    }
    const auto late = evolve(DensityMatrix::maximally_mixed(n), l, 50.0 / slowest);
    worst_oracle = std::max(worst_oracle, (late.matrix() - rho).cwiseAbs().maxCoeff());
  }
  v.detail << " 20 models, max residual " << worst_residual << ", max |evolve - steady| " << worst_oracle
           << ", hermiticity " << worst_herm << ", trace " << worst_trace << ", min eigenvalue " << min_eig;
  v.require(worst_residual < 1e-9, "residual < 1e-9");
  v.require(worst_oracle < 1e-6, "oracle agreement 1e-6");
  v.require(worst_herm < 1e-10 && worst_trace < 1e-10 && min_eig > -1e-9, "DensityMatrix invariants");
}

void transfer_mechanism(Verdict& v) {
  auto spec = field_spec(0, 1000, 21);
  spec.system.hyperfine = HyperfineTensor::axial(kDefaultHyperfine, 0);
  const auto r = sweep_field(spec);
  double worst = 0;
  for (const auto& pt : r.points) {
    v.require(pt.result.status == PointStatus::Ok, "point solved");
    worst = std::max(worst, std::abs(pt.result.nuclear));
  }
  v.detail << " 21 fields 0-1000 G, max |P| = " << worst;
  v.require(worst < 1e-6, "|P| < 1e-6");
}

void field_sweep(Verdict& v) {
  const auto r = sweep_field(field_spec(0, 1000, 101));
  auto at = [&](double b) { return r.at(static_cast<int>(std::lround(b / 10))).result.nuclear; };
  int best = 0;
  for (int k = 0; k < 101; ++k) {
    if (r.at(k).result.nuclear > r.at(best).result.nuclear) best = k;
  }
  const double b_max = r.values1[best];
  v.detail << " leak " << calibrated().pump_leak_ratio << "; P(100)=" << at(100) << ", P(500)=" << at(500)
           << ", P(900)=" << at(900) << ", max P=" << r.at(best).result.nuclear << " at " << b_max << " G";
  v.require(r.failures() == 0, "all points solved");
  v.require(at(500) > at(100), "P(500) > P(100)");
  v.require(at(500) > at(900), "P(500) > P(900)");
  v.require(b_max >= 450 && b_max <= 550, "max-P field in 450-550 G");
}

void strain_map(Verdict& v) {
  auto spec = field_spec(400, 600, 11);
  spec.axis2 = SweepAxis{SweepParameter::EEsMhz, 0, 300, 11};
  const auto r = scan_field_strain(spec);
  v.require(r.failures() == 0, "all grid points solved");
  const int i500 = 5;  // 400 + 5 * 20
  const double p0 = r.at(i500, 0).result.nuclear;
  // 100 MHz lies between the 90 and 120 MHz grid columns
  const double p90 = r.at(i500, 3).result.nuclear, p120 = r.at(i500, 4).result.nuclear;
  const double p100_grid = p90 + (p120 - p90) * (100.0 - 90.0) / 30.0;
  NVSystemParams p;
  p.b_gauss = Eigen::Vector3d(0, 0, 500);
  p.e_es_mhz = 100;
  const double p100 = evaluate_point(p, calibrated()).nuclear;
  v.detail << " P(500 G, 0)=" << p0 << ", P(500 G, 100 MHz)=" << p100 << " (grid interpolation " << p100_grid
           << "), ratio " << p100 / p0;
  v.require(p100 >= 0.5 * p0, "P(500,100) >= 0.5 P(500,0)");
  v.require(p100_grid >= 0.5 * p0, "grid interpolation agrees");
}

void polarization_formula(Verdict& v) {
  const auto one = SpinQuantumNumber::one();
  const std::vector<double> m{-1, 0, 1};
  const double equal = polarization_from_amplitudes({1, 1, 1}, m, one).p;
  const double single = polarization_from_amplitudes({0, 0, 1}, m, one).p;
  const double c13 = polarization_from_amplitudes({0.15, 0.85}, {-0.5, 0.5}, SpinQuantumNumber::half()).p;
  double worst_scale = 0;
  const std::vector<double> a{0.31, 0.07, 0.88};
  const double base = polarization_from_amplitudes(a, m, one).p;
  for (double s : {1e-6, 0.25, 2.0, 1e6}) {
    std::vector<double> scaled;
    for (double x : a) scaled.push_back(s * x);
    worst_scale = std::max(worst_scale, std::abs(polarization_from_amplitudes(scaled, m, one).p - base));
  }
  v.detail << " equal " << equal << ", single " << single << ", I=1/2 " << c13 << ", scaling drift " << worst_scale;
  v.require(std::abs(equal) < 1e-15, "P = 0 for equal amplitudes");
  v.require(single == 1.0, "P = 1 for one sublevel");
  v.require(std::abs(c13 - 0.70) < 1e-12, "P = 0.70");
  v.require(worst_scale <= 4e-16, "scale invariance to rounding");
}

void fit_recovery(Verdict& v) {
  const auto grid = linspace(-8, 8, 801);
  PeakSet truth;
  for (double c : {-2.16, 0.0, 2.16}) truth.peaks.push_back({c, 1.0, 1.0});
  const auto clean = evaluate_peaks(truth, grid);
  const auto one = SpinQuantumNumber::one();
  double worst_amp = 0, worst_p = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0 / 50);
    auto y = clean;
    for (double& x : y) x += g(rng);
    const auto fit = fit_spectrum(OdmrSpectrum(grid, y), 3);
    std::vector<double> amps;
    for (const auto& pk : fit.peaks) {
      amps.push_back(pk.peak.amplitude);
      worst_amp = std::max(worst_amp, std::abs(pk.peak.amplitude - 1.0));
    }
    worst_p = std::max(worst_p, std::abs(polarization_from_amplitudes(amps, {-1, 0, 1}, one).p));
  }
  v.detail << " triplet x100 seeds: max amplitude error " << 100 * worst_amp << "%, max |P| " << worst_p;
  v.require(worst_amp < 0.02, "amplitudes within 2%");
  v.require(worst_p < 0.03, "implied P within 0.03");

  const auto sgrid = linspace(1000, 1800, 1601);
  double worst_sigma = 0;
  for (double sigma : {5.0, 10.0, 20.0, 50.0, 100.0, 200.0}) {
    const auto profile = esodmr_profile({0, sigma, 32}, 1400, 10, sgrid);
    const double peak = *std::max_element(profile.begin(), profile.end());
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      std::mt19937_64 rng(1000 * seed + static_cast<std::uint64_t>(sigma));
      std::normal_distribution<double> g(0.0, 0.02 * peak);
      auto y = profile;
      for (double& x : y) x += g(rng);
      const auto fit = fit_strain_distribution(OdmrSpectrum(sgrid, y), 1400, 10);
      worst_sigma = std::max(worst_sigma, std::abs(fit.strain.sigma_mhz - sigma) / sigma);
    }
  }
  v.detail << "; strain sigma 5-200 MHz x100 seeds: max error " << 100 * worst_sigma << "%";
  v.require(worst_sigma < 0.10, "sigma within 10%");
}

void temperature_pipeline(Verdict& v) {
  NVSystemParams p;
  p.b_gauss = Eigen::Vector3d(0, 0, 500);
  const double temps[] = {300, 250, 200, 150, 100, 60, 30, 10, 4};
  const double sigmas[] = {5, 10, 20, 40, 70, 110, 170, 250, 350};
  std::vector<TemperatureRow> table;
  for (int k = 0; k < 9; ++k) table.push_back({temps[k], {0, sigmas[k], 32}});
  const auto curve = temperature_curve(p, calibrated(), table);
  v.detail << " P:";
  bool monotone = true;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    v.detail << ' ' << curve[k].temperature_k << "K=" << curve[k].polarization;
    if (k > 0 && curve[k].polarization > curve[k - 1].polarization) monotone = false;
  }
  v.require(monotone, "non-increasing toward low temperature");
  v.require(curve.back().polarization < curve.front().polarization, "net loss at low temperature");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void cli_determinism(Verdict& v) {
  const auto root = fs::temp_directory_path() / "nvpol_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  auto config = [&](const std::string& name, const std::string& text) {
    std::ofstream(root / name) << text;
    return root / name;
  };
  const auto line_cfg = config("line.json", R"({
    "system": {"b_axial_gauss": 500},
    "dissipation": {"calibrate_electron_polarization": 0.8},
    "sweep": {"axis1": {"parameter": "b_axial_gauss", "start": 0, "stop": 1000, "count": 21}},
    "temperature": {"quadrature_nodes": 16, "table": [{"temperature_k": 300, "sigma_mhz": 10},
                                                      {"temperature_k": 4, "sigma_mhz": 300}]},
    "peak_fit": {"n_peaks": 3, "m_values": [-1, 0, 1], "nuclear_spin_two_s": 2},
    "synth": {"kind": "odmr", "grid": {"start_mhz": -8, "stop_mhz": 8, "count": 801}, "noise_std": 0.02,
              "peaks": [{"center_mhz": -2.16, "fwhm_mhz": 1, "amplitude": 1},
                        {"center_mhz": 0, "fwhm_mhz": 1, "amplitude": 1},
                        {"center_mhz": 2.16, "fwhm_mhz": 1, "amplitude": 1}]}
  })");
  const auto grid_cfg = config("grid.json", R"({
    "dissipation": {"calibrate_electron_polarization": 0.8},
    "sweep": {"axis1": {"parameter": "b_axial_gauss", "start": 400, "stop": 600, "count": 6},
              "axis2": {"parameter": "e_es_mhz", "start": 0, "stop": 300, "count": 6}}
  })");
  const auto strain_cfg = config("strain.json", R"({
    "synth": {"kind": "esodmr", "grid": {"start_mhz": 1000, "stop_mhz": 1800, "count": 1601},
              "strain": {"sigma_mhz": 80}, "amplitude": 0.03, "noise_std": 0.0006}
  })");

  struct Job {
    std::string command;
    fs::path config;
    std::string input;  // file produced by an earlier job, relative to the run directory
  };
  const std::vector<Job> jobs{
      {"steady", line_cfg, ""},      {"sweep-b", line_cfg, ""},
      {"temperature", line_cfg, ""}, {"synth", line_cfg, ""},
      {"fit-odmr", line_cfg, "synth_odmr.txt"}, {"scan-2d", grid_cfg, ""},
      {"synth", strain_cfg, ""},     {"fit-strain", strain_cfg, "synth_esodmr.txt"},
  };

  for (int rep = 0; rep < 2; ++rep) {
    const auto out = root / ("run" + std::to_string(rep));
    for (const auto& job : jobs) {
      CommandOptions o;
      o.config = job.config;
      o.out_dir = out;
      o.seed = 20240601;
      o.threads = rep == 0 ? 1 : 3;
      if (!job.input.empty()) o.input = out / job.input;
      std::ostringstream err;
      const int code = run_command(job.command, o, err);
      v.require(code == 0, job.command + " exit 0 (" + err.str() + ")");
    }
  }
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(root / "run0")) {
    ++files;
    const auto twin = root / "run1" / entry.path().filename();
    if (fs::exists(twin) && slurp(entry.path()) == slurp(twin)) {
      ++identical;
    } else {
      v.require(false, "byte-identical " + entry.path().filename().string());
    }
  }
  v.detail << " " << jobs.size() << " command runs x2 (1 vs 3 threads): " << identical << "/" << files
           << " output files byte-identical";
  for (const char* name : {"steady_state.json", "sweep_b.csv", "sweep_b.dat", "temperature.csv",
                           "temperature.dat", "synth_odmr.txt", "fit_odmr.txt", "scan_2d.csv", "scan_2d.dat",
                           "synth_esodmr.txt", "fit_strain.txt"}) {
    v.require(fs::exists(root / "run0" / name), std::string("output ") + name);
  }
}

}  // namespace

int main() {
  std::cout.precision(6);
  int failed = 0;
  failed += !run_criterion(1, "Hamiltonian spectrum and ESLAC crossing", 1.0, hamiltonian_spectrum);
  failed += !run_criterion(2, "Lindblad steady state vs evolve oracle", 30.0, lindblad_correctness);
  failed += !run_criterion(3, "no transfer without transverse hyperfine", 30.0, transfer_mechanism);
  failed += !run_criterion(4, "zero-strain field sweep peaks at the ESLAC", 120.0, field_sweep);
  failed += !run_criterion(5, "polarization persists under strain", 180.0, strain_map);
  failed += !run_criterion(6, "polarization from resonance amplitudes", 1.0, polarization_formula);
  failed += !run_criterion(7, "fit recovery (triplet and strain)", 120.0, fit_recovery);
  failed += !run_criterion(8, "temperature pipeline trend", 120.0, temperature_pipeline);
  failed += !run_criterion(9, "CLI determinism", 300.0, cli_determinism);
  std::cout << (failed == 0 ? "all 9 criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
