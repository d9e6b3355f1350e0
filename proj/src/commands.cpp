#include "nvpol/commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nvpol/config.hpp"
#include "nvpol/format.hpp"
#include "nvpol/model.hpp"
#include "nvpol/odmr.hpp"
#include "nvpol/solver.hpp"
#include "nvpol/spectrum_io.hpp"
#include "nvpol/sweep.hpp"

namespace nvpol {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandFailure : std::runtime_error {
  CommandFailure(int code, std::string kind, const std::string& what)
      : std::runtime_error(what), code(code), kind(std::move(kind)) {}
  int code;
  std::string kind;
};

struct Context {
  RunConfig cfg;
  CommandOptions opts;
  std::string fingerprint;
};

std::string fmt(double x) { return format_double(x); }

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Physics parameters after optional pump calibration.
DissipationParams effective_dissipation(const RunConfig& cfg) {
  if (!cfg.calibrate_electron_polarization) return cfg.dissipation;
  try {
    return calibrate_pump(*cfg.calibrate_electron_polarization, cfg.dissipation, cfg.system);
  } catch (const UnreachableTarget& e) {
    throw CommandFailure(kExitInput, "unreachable_target",
                         std::string(e.what()) + " (attainable " + fmt(e.lowest()) + " to " +
                             fmt(e.highest()) + ")");
  }
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

int cmd_steady(const Context& ctx) {
  const auto& p = ctx.cfg.system;
  const auto d = effective_dissipation(ctx.cfg);
  prepare_out_dir(ctx.opts.out_dir);

  SteadyStateReport report = [&] {
    try {
      return steady_state(build_model(p, d));
    } catch (const SolverError& e) {
      throw CommandFailure(kExitNumerical, e.kind(), e.what());
    }
  }();
  const auto dims = p.dims();
  const auto& rho = report.rho.matrix();

  json re = json::array(), im = json::array();
  for (int r = 0; r < rho.rows(); ++r) {
    json row_re = json::array(), row_im = json::array();
    for (int c = 0; c < rho.cols(); ++c) {
      row_re.push_back(rho(r, c).real());
      row_im.push_back(rho(r, c).imag());
    }
    re.push_back(row_re);
    im.push_back(row_im);
  }

  json doc;
  doc["nuclear_polarization"] = nuclear_polarization(report.rho, dims, p.nuclear_spin);
  doc["electron_polarization"] = electron_polarization(report.rho, dims);
  doc["residual_norm"] = report.residual_norm;
  doc["null_space_dim"] = report.null_space_dim;
  doc["dims"] = dims;
  doc["b_gauss"] = {p.b_gauss.x(), p.b_gauss.y(), p.b_gauss.z()};
  doc["e_es_mhz"] = p.e_es_mhz;
  doc["pump_leak_ratio"] = d.pump_leak_ratio;
  doc["rho_real"] = re;
  doc["rho_imag"] = im;
  write_text(ctx.opts.out_dir / "steady_state.json", doc.dump(2) + "\n");
  return kExitOk;
}

SweepOptions sweep_options(const Context& ctx, const std::string& stem) {
  SweepOptions so;
  so.threads = ctx.opts.threads;
  so.fingerprint = ctx.fingerprint;
  if (ctx.cfg.checkpoint) so.checkpoint = ctx.opts.out_dir / (stem + ".checkpoint");
  return so;
}

SweepResult run_checkpointed(const Context& ctx, const SweepSpec& spec, const std::string& stem,
                             const std::function<SweepResult(const SweepSpec&, const SweepOptions&)>& run) {
  const auto so = sweep_options(ctx, stem);
  try {
    return run(spec, so);
  } catch (const CheckpointMismatch& e) {
    throw CommandFailure(kExitInput, "checkpoint_mismatch", e.what());
  }
}

// The checkpoint only exists to resume an interrupted run; once the table is
// written it is removed so that a finished output directory is reproducible.
void finish_sweep(const Context& ctx, const std::string& stem) {
  if (ctx.cfg.checkpoint) fs::remove(ctx.opts.out_dir / (stem + ".checkpoint"));
}

int sweep_exit(const SweepResult& r, const std::string& what) {
  const std::size_t total = r.points.size();
  const std::size_t failed = static_cast<std::size_t>(r.failures());
  if (2 * failed >= total && failed > 0) {
    throw CommandFailure(kExitPartialSweep, "partial_sweep_failure",
                         what + ": " + std::to_string(failed) + " of " + std::to_string(total) +
                             " points failed");
  }
  return kExitOk;
}

SweepSpec base_spec(const Context& ctx, const DissipationParams& d) {
  SweepSpec spec;
  spec.system = ctx.cfg.system;
  spec.dissipation = d;
  return spec;
}

int cmd_sweep_b(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.axis1 || cfg.axis1->parameter != SweepParameter::BAxialGauss || cfg.axis2) {
    throw ConfigError("sweep-b needs sweep.axis1 over b_axial_gauss and no axis2");
  }
  const auto d = effective_dissipation(cfg);
  prepare_out_dir(ctx.opts.out_dir);

  SweepSpec spec = base_spec(ctx, d);
  spec.axis1 = *cfg.axis1;
  const auto result = run_checkpointed(ctx, spec, "sweep_b", sweep_field);

  std::ostringstream csv, dat;
  csv << "b_axial_gauss,nuclear_polarization,electron_polarization,residual,status\n";
  dat << "# b_axial_gauss nuclear_polarization\n";
  for (const auto& pt : result.points) {
    csv << fmt(pt.v1) << ',' << fmt(pt.result.nuclear) << ',' << fmt(pt.result.electron) << ','
        << fmt(pt.result.residual) << ',' << to_string(pt.result.status) << '\n';
    if (pt.result.status == PointStatus::Ok) dat << fmt(pt.v1) << ' ' << fmt(pt.result.nuclear) << '\n';
  }
  write_text(ctx.opts.out_dir / "sweep_b.csv", csv.str());
  write_text(ctx.opts.out_dir / "sweep_b.dat", dat.str());
  finish_sweep(ctx, "sweep_b");
  return sweep_exit(result, "sweep-b");
}

int cmd_scan_2d(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.axis1 || !cfg.axis2 || cfg.axis1->parameter != SweepParameter::BAxialGauss ||
      cfg.axis2->parameter != SweepParameter::EEsMhz) {
    throw ConfigError("scan-2d needs sweep.axis1 over b_axial_gauss and sweep.axis2 over e_es_mhz");
  }
  const auto d = effective_dissipation(cfg);
  prepare_out_dir(ctx.opts.out_dir);

  SweepSpec spec = base_spec(ctx, d);
  spec.axis1 = *cfg.axis1;
  spec.axis2 = *cfg.axis2;
  const auto result = run_checkpointed(ctx, spec, "scan_2d", scan_field_strain);

  std::ostringstream csv, dat;
  csv << "b_axial_gauss,e_es_mhz,nuclear_polarization,electron_polarization,residual,status\n";
  dat << "# b_axial_gauss e_es_mhz nuclear_polarization\n";
  for (int i1 = 0; i1 < static_cast<int>(result.values1.size()); ++i1) {
    if (i1 > 0) dat << '\n';
    for (int i2 = 0; i2 < result.count2(); ++i2) {
      const auto& pt = result.at(i1, i2);
      csv << fmt(pt.v1) << ',' << fmt(pt.v2) << ',' << fmt(pt.result.nuclear) << ','
          << fmt(pt.result.electron) << ',' << fmt(pt.result.residual) << ','
          << to_string(pt.result.status) << '\n';
      dat << fmt(pt.v1) << ' ' << fmt(pt.v2) << ' ' << fmt(pt.result.nuclear) << '\n';
    }
  }
  write_text(ctx.opts.out_dir / "scan_2d.csv", csv.str());
  write_text(ctx.opts.out_dir / "scan_2d.dat", dat.str());
  finish_sweep(ctx, "scan_2d");
  return sweep_exit(result, "scan-2d");
}

PointStatus status_of(const SolverError& e) {
  if (dynamic_cast<const DegenerateSteadyState*>(&e)) return PointStatus::Degenerate;
  if (dynamic_cast<const NoStationaryState*>(&e)) return PointStatus::NoStationary;
  if (dynamic_cast<const InvalidState*>(&e)) return PointStatus::InvalidState;
  return PointStatus::Failed;
}

int cmd_temperature(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.temperature_table.empty()) throw ConfigError("temperature needs a temperature.table");
  const auto d = effective_dissipation(cfg);
  prepare_out_dir(ctx.opts.out_dir);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream csv, dat;
  csv << "temperature_k,strain_mean_mhz,strain_sigma_mhz,nuclear_polarization,electron_polarization,"
         "residual,status\n";
  dat << "# temperature_k nuclear_polarization\n";
  std::size_t failed = 0;
  for (const auto& row : cfg.temperature_table) {
    StrainAverage avg{nan, nan, nan};
    PointStatus status = PointStatus::Ok;
    try {
      avg = strain_averaged_observables(cfg.system, d, row.strain);
    } catch (const SolverError& e) {
      status = status_of(e);
      ++failed;
    }
    csv << fmt(row.temperature_k) << ',' << fmt(row.strain.mean_mhz) << ',' << fmt(row.strain.sigma_mhz)
        << ',' << fmt(avg.nuclear) << ',' << fmt(avg.electron) << ',' << fmt(avg.max_residual) << ','
        << to_string(status) << '\n';
    if (status == PointStatus::Ok) dat << fmt(row.temperature_k) << ' ' << fmt(avg.nuclear) << '\n';
  }
  write_text(ctx.opts.out_dir / "temperature.csv", csv.str());
  write_text(ctx.opts.out_dir / "temperature.dat", dat.str());
  if (failed > 0 && 2 * failed >= cfg.temperature_table.size()) {
    throw CommandFailure(kExitPartialSweep, "partial_sweep_failure",
                         "temperature: " + std::to_string(failed) + " of " +
                             std::to_string(cfg.temperature_table.size()) + " rows failed");
  }
  return kExitOk;
}

fs::path spectrum_input(const Context& ctx, const std::optional<fs::path>& configured,
                        const std::string& section) {
  if (ctx.opts.input) {
    if (!fs::is_regular_file(*ctx.opts.input)) {
      throw ConfigError("input spectrum not found: " + ctx.opts.input->string());
    }
    return *ctx.opts.input;
  }
  if (configured) return *configured;
  throw ConfigError("no spectrum: pass --input or set " + section + ".spectrum_path");
}

int cmd_fit_odmr(const Context& ctx) {
  const auto& f = ctx.cfg.peak_fit;
  const auto path = spectrum_input(ctx, f.spectrum_path, "peak_fit");
  const auto data = read_spectrum(path, f.invert_contrast);
  PeakFitOptions po;
  po.max_iterations = f.max_iterations;
  const auto fit = fit_spectrum(data, f.n_peaks, f.initial_peaks, po);

  std::optional<PolarizationEstimate> pol;
  if (!f.m_values.empty()) {
    std::vector<double> amps, sig;
    for (const auto& pk : fit.peaks) {
      amps.push_back(pk.peak.amplitude);
      sig.push_back(pk.uncertainty.amplitude);
    }
    try {
      pol = polarization_from_amplitudes(amps, f.m_values, *f.nuclear_spin, sig);
    } catch (const std::invalid_argument& e) {
      throw CommandFailure(kExitNumerical, "polarization_undefined", e.what());
    }
  }
  prepare_out_dir(ctx.opts.out_dir);

  std::ostringstream rep;
  rep << "# fit-odmr report\n";
  rep << "input " << path.filename().string() << '\n';
  rep << "points " << data.size() << '\n';
  rep << "converged " << fmt_bool(fit.converged) << '\n';
  rep << "iterations " << fit.iterations << '\n';
  rep << "residual_norm " << fmt(fit.residual_norm) << '\n';
  rep << "baseline " << fmt(fit.baseline) << ' ' << fmt(fit.baseline_uncertainty) << '\n';
  rep << "peaks " << fit.peaks.size() << '\n';
  rep << "# peak index center_mhz center_unc fwhm_mhz fwhm_unc amplitude amplitude_unc pinned_at_zero\n";
  for (std::size_t k = 0; k < fit.peaks.size(); ++k) {
    const auto& pk = fit.peaks[k];
    rep << "peak " << k << ' ' << fmt(pk.peak.center_mhz) << ' ' << fmt(pk.uncertainty.center_mhz) << ' '
        << fmt(pk.peak.fwhm_mhz) << ' ' << fmt(pk.uncertainty.fwhm_mhz) << ' ' << fmt(pk.peak.amplitude)
        << ' ' << fmt(pk.uncertainty.amplitude) << ' ' << fmt_bool(pk.pinned_at_zero) << '\n';
  }
  if (pol) {
    rep << "# polarization value uncertainty\n";
    rep << "polarization " << fmt(pol->p) << ' ' << fmt(pol->uncertainty) << '\n';
  }
  write_text(ctx.opts.out_dir / "fit_odmr.txt", rep.str());
  if (!fit.converged) {
    throw CommandFailure(kExitNumerical, "not_converged",
                         "fit-odmr: no convergence after " + std::to_string(fit.iterations) +
                             " iterations; best-so-far report written");
  }
  return kExitOk;
}

int cmd_fit_strain(const Context& ctx) {
  const auto& f = ctx.cfg.strain_fit;
  const auto path = spectrum_input(ctx, f.spectrum_path, "strain_fit");
  const auto data = read_spectrum(path, f.invert_contrast);
  StrainFitOptions so;
  so.fit_d_es = f.fit_d_es;
  so.max_iterations = f.max_iterations;
  so.window_mhz = f.window_mhz;
  const auto fit = fit_strain_distribution(data, f.d_es_mhz, f.natural_fwhm_mhz, so);
  const auto metric = resonance_metric(data, f.central_range_mhz);
  prepare_out_dir(ctx.opts.out_dir);

  std::ostringstream rep;
  rep << "# fit-strain report\n";
  rep << "input " << path.filename().string() << '\n';
  rep << "points " << data.size() << '\n';
  rep << "window_mhz " << fmt(f.window_mhz.first) << ' ' << fmt(f.window_mhz.second) << '\n';
  rep << "natural_fwhm_mhz " << fmt(f.natural_fwhm_mhz) << '\n';
  rep << "converged " << fmt_bool(fit.converged) << '\n';
  rep << "iterations " << fit.iterations << '\n';
  rep << "residual_norm " << fmt(fit.residual_norm) << '\n';
  rep << "# parameter value uncertainty\n";
  rep << "strain_mean_mhz " << fmt(fit.strain.mean_mhz) << " 0\n";
  rep << "strain_sigma_mhz " << fmt(fit.strain.sigma_mhz) << ' ' << fmt(fit.sigma_uncertainty) << '\n';
  rep << "amplitude " << fmt(fit.amplitude) << ' ' << fmt(fit.amplitude_uncertainty) << '\n';
  rep << "d_es_mhz " << fmt(fit.d_es_mhz) << ' ' << fmt(fit.d_es_uncertainty) << '\n';
  rep << "sigma_pinned_at_zero " << fmt_bool(fit.sigma_pinned_at_zero) << '\n';
  rep << "identifiable " << fmt_bool(fit.identifiable) << '\n';
  rep << "# resonance metric over central range\n";
  rep << "central_range_mhz " << fmt(f.central_range_mhz.first) << ' ' << fmt(f.central_range_mhz.second)
      << '\n';
  rep << "metric " << fmt(metric.value) << '\n';
  rep << "metric_mean_contrast " << fmt(metric.mean_contrast) << '\n';
  rep << "metric_fwhm_mhz " << fmt(metric.fwhm_mhz) << '\n';
  rep << "metric_flagged " << fmt_bool(metric.flagged) << '\n';
  write_text(ctx.opts.out_dir / "fit_strain.txt", rep.str());
  if (!fit.converged) {
    throw CommandFailure(kExitNumerical, "not_converged",
                         "fit-strain: no convergence after " + std::to_string(fit.iterations) +
                             " iterations; best-so-far report written");
  }
  return kExitOk;
}

int cmd_synth(const Context& ctx) {
  const auto& y = ctx.cfg.synth;
  if (!y.configured) throw ConfigError("synth needs a synth section");
  const auto grid = y.grid();
  std::vector<double> clean;
  std::string name, comment;
  if (y.kind == SynthKind::Odmr) {
    clean = evaluate_peaks(y.peaks, grid);
    name = "synth_odmr.txt";
    comment = "synthetic ODMR, " + std::to_string(y.peaks.peaks.size()) + " Lorentzian peaks";
  } else {
    clean = esodmr_profile(y.strain, y.d_es_mhz, y.natural_fwhm_mhz, grid);
    for (double& v : clean) v *= y.amplitude;
    name = "synth_esodmr.txt";
    comment = "synthetic ESODMR, strain sigma " + fmt(y.strain.sigma_mhz) + " MHz";
  }
  std::mt19937_64 rng(ctx.cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> noisy(clean.size());
  for (std::size_t k = 0; k < clean.size(); ++k) {
    noisy[k] = y.noise_std > 0 ? clean[k] + y.noise_std * noise(rng) : clean[k];
  }
  prepare_out_dir(ctx.opts.out_dir);
  write_spectrum(ctx.opts.out_dir / name, OdmrSpectrum(grid, noisy),
                 comment + ", noise_std " + fmt(y.noise_std) + ", seed " + std::to_string(ctx.cfg.seed));
  return kExitOk;
}

const std::map<std::string, std::function<int(const Context&)>>& registry() {
  static const std::map<std::string, std::function<int(const Context&)>> table{
      {"steady", cmd_steady},           {"sweep-b", cmd_sweep_b},       {"scan-2d", cmd_scan_2d},
      {"temperature", cmd_temperature}, {"fit-odmr", cmd_fit_odmr},     {"fit-strain", cmd_fit_strain},
      {"synth", cmd_synth},
  };
  return table;
}

void report_error(std::ostream& err, const std::string& command, int code, const std::string& kind,
                  const std::string& message) {
  json rec;
  rec["command"] = command;
  rec["exit_code"] = code;
  rec["error"] = kind;
  rec["message"] = message;
  err << rec.dump() << '\n';
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"steady",   "sweep-b",    "scan-2d", "temperature",
                                              "fit-odmr", "fit-strain", "synth"};
  return names;
}

int run_command(const std::string& name, const CommandOptions& options, std::ostream& err) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    report_error(err, name, kExitInput, "unknown_command", "unknown command " + name);
    return kExitInput;
  }
  try {
    Context ctx;
    ctx.cfg = load_config(options.config);
    ctx.opts = options;
    if (options.seed) ctx.cfg.seed = *options.seed;
    ctx.fingerprint = fingerprint(ctx.cfg.canonical);
    return it->second(ctx);
  } catch (const CommandFailure& e) {
    report_error(err, name, e.code, e.kind, e.what());
    return e.code;
  } catch (const ConfigError& e) {
    report_error(err, name, kExitInput, "config_error", e.what());
    return kExitInput;
  } catch (const SpectrumError& e) {
    report_error(err, name, kExitInput, "spectrum_error", e.what());
    return kExitInput;
  } catch (const SolverError& e) {
    report_error(err, name, kExitNumerical, e.kind(), e.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    report_error(err, name, kExitInput, "invalid_input", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    report_error(err, name, kExitNumerical, "runtime_error", e.what());
    return kExitNumerical;
  }
}

}  // namespace nvpol
