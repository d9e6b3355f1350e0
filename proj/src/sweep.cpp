#include "nvpol/sweep.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "nvpol/format.hpp"
#include "nvpol/quadrature.hpp"
#include "nvpol/solver.hpp"

namespace nvpol {

std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::BAxialGauss: return "b_axial_gauss";
    case SweepParameter::EEsMhz: return "e_es_mhz";
    case SweepParameter::APerpMhz: return "a_perp_mhz";
    case SweepParameter::AParMhz: return "a_par_mhz";
  }
  return "unknown";
}

std::optional<SweepParameter> parse_sweep_parameter(std::string_view name) {
  for (auto p : {SweepParameter::BAxialGauss, SweepParameter::EEsMhz, SweepParameter::APerpMhz,
                 SweepParameter::AParMhz}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

void apply_parameter(NVSystemParams& p, SweepParameter which, double value) {
  switch (which) {
    case SweepParameter::BAxialGauss:
      p.b_gauss.z() = value;
      return;
    case SweepParameter::EEsMhz:
      p.e_es_mhz = value;
      return;
    case SweepParameter::APerpMhz:
    case SweepParameter::AParMhz: {
      if (!p.hyperfine.is_axial()) {
        throw std::invalid_argument("sweeping " + to_string(which) +
                                    " requires the axial hyperfine form");
      }
      auto a = p.hyperfine.axial_part();
      (which == SweepParameter::APerpMhz ? a.a_perp_mhz : a.a_par_mhz) = value;
      p.hyperfine = HyperfineTensor::axial(a.a_par_mhz, a.a_perp_mhz);
      return;
    }
  }
}

void SweepAxis::validate() const {
  if (count < 1) throw std::invalid_argument("sweep axis count must be >= 1");
  if (!(start <= stop)) throw std::invalid_argument("sweep axis requires start <= stop");
}

std::vector<double> SweepAxis::values() const {
  validate();
  std::vector<double> v(count);
  for (int k = 0; k < count; ++k) {
    v[k] = count == 1 ? start : start + (stop - start) * k / (count - 1);
  }
  return v;
}

std::string to_string(PointStatus s) {
  switch (s) {
    case PointStatus::Ok: return "ok";
    case PointStatus::Degenerate: return "degenerate";
    case PointStatus::NoStationary: return "no_stationary_state";
    case PointStatus::InvalidState: return "invalid_state";
    case PointStatus::Failed: return "failed";
  }
  return "failed";
}

std::optional<PointStatus> parse_point_status(std::string_view name) {
  for (auto s : {PointStatus::Ok, PointStatus::Degenerate, PointStatus::NoStationary,
                 PointStatus::InvalidState, PointStatus::Failed}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

PointResult evaluate_point(const NVSystemParams& p, const DissipationParams& d) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  PointResult out{nan, nan, nan, PointStatus::Failed};
  try {
    const auto report = steady_state(build_model(p, d));
    const auto dims = p.dims();
    out.nuclear = nuclear_polarization(report.rho, dims, p.nuclear_spin);
    out.electron = electron_polarization(report.rho, dims);
    out.residual = report.residual_norm;
    out.status = PointStatus::Ok;
  } catch (const DegenerateSteadyState&) {
    out.status = PointStatus::Degenerate;
  } catch (const NoStationaryState&) {
    out.status = PointStatus::NoStationary;
  } catch (const InvalidState&) {
    out.status = PointStatus::InvalidState;
  }
  return out;
}

int SweepResult::failures() const {
  int n = 0;
  for (const auto& pt : points) n += pt.result.status != PointStatus::Ok;
  return n;
}

namespace {

std::string checkpoint_row(const SweepPoint& pt) {
  std::ostringstream row;
  row << pt.i1 << ',' << pt.i2 << ',' << format_double(pt.v1) << ',' << format_double(pt.v2) << ','
      << format_double(pt.result.nuclear) << ',' << format_double(pt.result.electron) << ','
      << format_double(pt.result.residual) << ',' << to_string(pt.result.status);
  return row.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Rows already on disk, keyed by flat index.
std::map<int, SweepPoint> load_checkpoint(const std::filesystem::path& path, const SweepResult& grid,
                                          const std::string& fingerprint) {
  std::map<int, SweepPoint> done;
  std::ifstream in(path);
  if (!in) return done;
  const int n2 = grid.count2();
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# fingerprint ", 0) == 0) {
      const std::string stored = line.substr(14);
      if (!fingerprint.empty() && stored != fingerprint) {
        throw CheckpointMismatch("checkpoint " + path.string() +
                                 " was written for a different configuration");
      }
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ',');
    // a torn final line from an interrupted run is ignored
    if (f.size() != 8) continue;
    SweepPoint pt;
    try {
      pt.i1 = std::stoi(f[0]);
      pt.i2 = std::stoi(f[1]);
      pt.v1 = parse_double(f[2]);
      pt.v2 = parse_double(f[3]);
      pt.result.nuclear = parse_double(f[4]);
      pt.result.electron = parse_double(f[5]);
      pt.result.residual = parse_double(f[6]);
    } catch (const std::exception&) {
      continue;
    }
    const auto status = parse_point_status(f[7]);
    if (!status) continue;
    pt.result.status = *status;
    if (pt.i1 < 0 || pt.i1 >= static_cast<int>(grid.values1.size()) || pt.i2 < 0 || pt.i2 >= n2) {
      throw CheckpointMismatch("checkpoint row index outside the sweep grid: " + line);
    }
    const auto& expect = grid.points[pt.i1 * n2 + pt.i2];
    if (pt.v1 != expect.v1 || pt.v2 != expect.v2) {
      throw CheckpointMismatch("checkpoint axis values differ from the sweep configuration: " + line);
    }
    done[pt.i1 * n2 + pt.i2] = pt;
  }
  return done;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& options) {
  spec.system.validate();
  spec.dissipation.validate();

  SweepResult result;
  result.axis1 = spec.axis1;
  result.axis2 = spec.axis2;
  result.values1 = spec.axis1.values();
  if (spec.axis2) result.values2 = spec.axis2->values();
  const int n1 = static_cast<int>(result.values1.size());
  const int n2 = result.count2();

  result.points.resize(static_cast<std::size_t>(n1) * n2);
  for (int i1 = 0; i1 < n1; ++i1) {
    for (int i2 = 0; i2 < n2; ++i2) {
      auto& pt = result.points[i1 * n2 + i2];
      pt.i1 = i1;
      pt.i2 = i2;
      pt.v1 = result.values1[i1];
      pt.v2 = spec.axis2 ? result.values2[i2] : 0.0;
    }
  }

  // fail early on parameter combinations apply_parameter rejects
  {
    NVSystemParams probe = spec.system;
    apply_parameter(probe, spec.axis1.parameter, result.values1.front());
    if (spec.axis2) apply_parameter(probe, spec.axis2->parameter, result.values2.front());
  }

  std::vector<char> finished(result.points.size(), 0);
  std::ofstream journal;
  if (options.checkpoint) {
    for (const auto& [idx, pt] : load_checkpoint(*options.checkpoint, result, options.fingerprint)) {
      result.points[idx] = pt;
      finished[idx] = 1;
    }
    const bool fresh = !std::filesystem::exists(*options.checkpoint) ||
                       std::filesystem::file_size(*options.checkpoint) == 0;
    journal.open(*options.checkpoint, std::ios::app);
    if (!journal) throw std::runtime_error("cannot open checkpoint " + options.checkpoint->string());
    if (fresh && !options.fingerprint.empty()) journal << "# fingerprint " << options.fingerprint << '\n';
    if (fresh) journal << "# i1,i2,v1,v2,nuclear_polarization,electron_polarization,residual,status\n";
    journal.flush();
  }

  std::atomic<std::size_t> next{0};
  std::mutex journal_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= result.points.size()) return;
      if (finished[idx]) continue;
      auto& pt = result.points[idx];
      NVSystemParams p = spec.system;
      apply_parameter(p, spec.axis1.parameter, pt.v1);
      if (spec.axis2) apply_parameter(p, spec.axis2->parameter, pt.v2);
      pt.result = evaluate_point(p, spec.dissipation);
      if (journal.is_open()) {
        std::lock_guard lock(journal_mutex);
        journal << checkpoint_row(pt) << '\n';
        journal.flush();
      }
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return result;
}

SweepResult sweep_field(const SweepSpec& spec, const SweepOptions& options) {
  if (spec.axis1.parameter != SweepParameter::BAxialGauss || spec.axis2) {
    throw std::invalid_argument("sweep_field expects a single b_axial_gauss axis");
  }
  return run_sweep(spec, options);
}

SweepResult scan_field_strain(const SweepSpec& spec, const SweepOptions& options) {
  if (spec.axis1.parameter != SweepParameter::BAxialGauss || !spec.axis2 ||
      spec.axis2->parameter != SweepParameter::EEsMhz) {
    throw std::invalid_argument("scan_field_strain expects axes (b_axial_gauss, e_es_mhz)");
  }
  return run_sweep(spec, options);
}

void StrainDistribution::validate() const {
  if (!(sigma_mhz >= 0)) throw std::invalid_argument("strain sigma must be >= 0");
  if (n_quadrature < 1) throw std::invalid_argument("n_quadrature must be >= 1");
  if (!std::isfinite(mean_mhz)) throw std::invalid_argument("strain mean must be finite");
}

StrainAverage strain_averaged_observables(const NVSystemParams& base, const DissipationParams& d,
                                          const StrainDistribution& dist) {
  dist.validate();
  std::vector<double> strain{dist.mean_mhz};
  std::vector<double> weight{1.0};
  if (dist.sigma_mhz > 0) {
    const auto rule = gauss_hermite(dist.n_quadrature);
    strain.clear();
    weight.clear();
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      strain.push_back(dist.mean_mhz + std::numbers::sqrt2 * dist.sigma_mhz * rule.nodes[k]);
      weight.push_back(rule.weights[k] / std::sqrt(std::numbers::pi));
    }
  }

  StrainAverage out;
  for (std::size_t k = 0; k < strain.size(); ++k) {
    NVSystemParams p = base;
    p.e_es_mhz = strain[k];
    const auto report = steady_state(build_model(p, d));
    out.nuclear += weight[k] * nuclear_polarization(report.rho, p.dims(), p.nuclear_spin);
    out.electron += weight[k] * electron_polarization(report.rho, p.dims());
    out.max_residual = std::max(out.max_residual, report.residual_norm);
  }
  return out;
}

double strain_averaged_polarization(const NVSystemParams& base, const DissipationParams& d,
                                    const StrainDistribution& dist) {
  return strain_averaged_observables(base, d, dist).nuclear;
}

std::vector<TemperaturePoint> temperature_curve(const NVSystemParams& base,
                                                const DissipationParams& d,
                                                const std::vector<TemperatureRow>& table) {
  if (table.empty()) throw std::invalid_argument("temperature_curve: empty table");
  std::vector<TemperaturePoint> out;
  out.reserve(table.size());
  for (const auto& row : table) {
    out.push_back({row.temperature_k, strain_averaged_polarization(base, d, row.strain)});
  }
  return out;
}

}  // namespace nvpol
