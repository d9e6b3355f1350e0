#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nvpol/model.hpp"

namespace nvpol {

enum class SweepParameter { BAxialGauss, EEsMhz, APerpMhz, AParMhz };

std::string to_string(SweepParameter p);
std::optional<SweepParameter> parse_sweep_parameter(std::string_view name);

// Sets one swept parameter on a copy of the system. Hyperfine parameters
// require the axial hyperfine form.
void apply_parameter(NVSystemParams& p, SweepParameter which, double value);

struct SweepAxis {
  SweepParameter parameter = SweepParameter::BAxialGauss;
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  void validate() const;
  std::vector<double> values() const;
};

struct SweepSpec {
  NVSystemParams system;
  DissipationParams dissipation;
  SweepAxis axis1;
  std::optional<SweepAxis> axis2;
};

enum class PointStatus { Ok, Degenerate, NoStationary, InvalidState, Failed };

std::string to_string(PointStatus s);
std::optional<PointStatus> parse_point_status(std::string_view name);

struct PointResult {
  double nuclear = 0.0;
  double electron = 0.0;
  double residual = 0.0;
  PointStatus status = PointStatus::Ok;
};

// One steady-state solve. Solver failures are folded into the status; failed
// points carry NaN observables.
PointResult evaluate_point(const NVSystemParams& p, const DissipationParams& d);

struct SweepPoint {
  int i1 = 0;
  int i2 = 0;
  double v1 = 0.0;
  double v2 = 0.0;
  PointResult result;
};

struct SweepResult {
  SweepAxis axis1;
  std::optional<SweepAxis> axis2;
  std::vector<double> values1;
  std::vector<double> values2;    // empty for 1-D sweeps
  std::vector<SweepPoint> points;  // row-major: i1 outer, i2 inner

  int count2() const { return values2.empty() ? 1 : static_cast<int>(values2.size()); }
  const SweepPoint& at(int i1, int i2 = 0) const { return points[i1 * count2() + i2]; }
  int failures() const;
};

struct SweepOptions {
  int threads = 1;
  // Append-only record of finished points; existing rows are reused on restart.
  std::optional<std::filesystem::path> checkpoint;
  // Identifies the physics behind the grid; a checkpoint written under a
  // different fingerprint is rejected.
  std::string fingerprint;
};

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SweepResult run_sweep(const SweepSpec& spec, const SweepOptions& options = {});

// 1-D sweep over b_axial_gauss.
SweepResult sweep_field(const SweepSpec& spec, const SweepOptions& options = {});

// 2-D grid over (b_axial_gauss, e_es_mhz).
SweepResult scan_field_strain(const SweepSpec& spec, const SweepOptions& options = {});

struct StrainDistribution {
  double mean_mhz = 0.0;
  double sigma_mhz = 0.0;
  int n_quadrature = 32;

  void validate() const;
};

struct StrainAverage {
  double nuclear = 0.0;
  double electron = 0.0;
  double max_residual = 0.0;
};

// Nuclear and electron polarization averaged over e_es ~ Normal(mean, sigma)
// by Gauss-Hermite quadrature. Throws the underlying SolverError if any node fails.
StrainAverage strain_averaged_observables(const NVSystemParams& base, const DissipationParams& d,
                                          const StrainDistribution& dist);

double strain_averaged_polarization(const NVSystemParams& base, const DissipationParams& d,
                                    const StrainDistribution& dist);

struct TemperatureRow {
  double temperature_k = 0.0;
  StrainDistribution strain;
};

struct TemperaturePoint {
  double temperature_k = 0.0;
  double polarization = 0.0;
};

std::vector<TemperaturePoint> temperature_curve(const NVSystemParams& base,
                                                const DissipationParams& d,
                                                const std::vector<TemperatureRow>& table);

}  // namespace nvpol
