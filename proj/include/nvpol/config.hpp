#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvpol/model.hpp"
#include "nvpol/odmr.hpp"
#include "nvpol/sweep.hpp"

namespace nvpol {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PeakFitSettings {
  std::optional<std::filesystem::path> spectrum_path;
  int n_peaks = 3;
  std::vector<double> m_values;  // one per peak, ascending center order
  std::optional<SpinQuantumNumber> nuclear_spin;
  std::optional<PeakSet> initial_peaks;
  int max_iterations = 200;
  bool invert_contrast = false;
};

struct StrainFitSettings {
  std::optional<std::filesystem::path> spectrum_path;
  double d_es_mhz = kDefaultDes;
  double natural_fwhm_mhz = 10.0;
  bool fit_d_es = false;
  std::pair<double, double> window_mhz{1000.0, 1800.0};
  std::pair<double, double> central_range_mhz{1380.0, 1440.0};
  int max_iterations = 200;
  bool invert_contrast = false;
};

enum class SynthKind { Odmr, Esodmr };

struct SynthSettings {
  SynthKind kind = SynthKind::Odmr;
  double grid_start_mhz = 0.0;
  double grid_stop_mhz = 0.0;
  int grid_count = 0;
  double noise_std = 0.0;
  PeakSet peaks;  // odmr
  StrainDistribution strain;  // esodmr
  double d_es_mhz = kDefaultDes;
  double natural_fwhm_mhz = 10.0;
  double amplitude = 1.0;
  bool configured = false;

  std::vector<double> grid() const;
};

struct RunConfig {
  NVSystemParams system;
  DissipationParams dissipation;
  std::optional<double> calibrate_electron_polarization;

  std::optional<SweepAxis> axis1;
  std::optional<SweepAxis> axis2;
  bool checkpoint = true;

  std::vector<TemperatureRow> temperature_table;

  PeakFitSettings peak_fit;
  StrainFitSettings strain_fit;
  SynthSettings synth;

  std::uint64_t seed = 0;
  // Canonical dump of the parsed document, used to fingerprint checkpoints.
  std::string canonical;
};

// Parses a JSON document. Unknown keys, wrong types, out-of-range values and
// missing referenced files raise ConfigError. Relative paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a, hex encoded.
std::string fingerprint(const std::string& text);

}  // namespace nvpol
