#include "nvpol/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nvpol {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and remembers which were consumed, so that
// leftovers (typos, unit-less names) can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::optional<double> number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where(key) + " must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  // Positive duration; the string "inf" disables the associated channel.
  double duration(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number or \"inf\"");
    return v.get<double>();
  }

  std::optional<long long> integer(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
    return v.get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::optional<std::pair<double, double>> range(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const auto v = numbers(key);
    if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(where(key) + " must be [low, high] with low < high");
    return std::pair{v[0], v[1]};
  }

  Section child(const std::string& key) { return Section(raw(key), where(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key " + where(key));
    }
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SpinQuantumNumber parse_spin(Section& s, const std::string& key) {
  const auto two_s = s.integer(key);
  if (!two_s || *two_s < 1 || *two_s > 3) {
    throw ConfigError(s.where(key) + " must be an integer in [1, 3] (twice the spin)");
  }
  return SpinQuantumNumber(static_cast<int>(*two_s));
}

void parse_system(Section s, RunConfig& cfg) {
  auto& p = cfg.system;
  p.d_es_mhz = s.number("d_es_mhz", p.d_es_mhz);
  p.e_es_mhz = s.number("e_es_mhz", p.e_es_mhz);
  p.gamma_e_mhz_per_gauss = s.number("gamma_e_mhz_per_gauss", p.gamma_e_mhz_per_gauss);
  p.gamma_n_mhz_per_gauss = s.number("gamma_n_mhz_per_gauss", p.gamma_n_mhz_per_gauss);
  if (s.has("b_gauss") && s.has("b_axial_gauss")) {
    throw ConfigError(s.where() + ": give either b_gauss or b_axial_gauss, not both");
  }
  if (s.has("b_gauss")) {
    const auto b = s.numbers("b_gauss");
    if (b.size() != 3) throw ConfigError(s.where("b_gauss") + " must have three components");
    p.b_gauss = Eigen::Vector3d(b[0], b[1], b[2]);
  }
  if (const auto bz = s.number("b_axial_gauss")) p.b_gauss = Eigen::Vector3d(0, 0, *bz);
  if (s.has("nuclear_spin_two_s")) p.nuclear_spin = parse_spin(s, "nuclear_spin_two_s");

  if (s.has("hyperfine")) {
    Section h = s.child("hyperfine");
    if (h.has("tensor_mhz")) {
      if (h.has("a_par_mhz") || h.has("a_perp_mhz")) {
        throw ConfigError(h.where() + ": tensor_mhz excludes a_par_mhz/a_perp_mhz");
      }
      const json& t = h.raw("tensor_mhz");
      Eigen::Matrix3d a;
      if (!t.is_array() || t.size() != 3) throw ConfigError(h.where("tensor_mhz") + " must be 3x3");
      for (int r = 0; r < 3; ++r) {
        if (!t[r].is_array() || t[r].size() != 3) throw ConfigError(h.where("tensor_mhz") + " must be 3x3");
        for (int c = 0; c < 3; ++c) {
          if (!t[r][c].is_number()) throw ConfigError(h.where("tensor_mhz") + " entries must be numbers");
          a(r, c) = t[r][c].get<double>();
        }
      }
      try {
        p.hyperfine = HyperfineTensor::full(a);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(h.where("tensor_mhz") + ": " + e.what());
      }
    } else {
      p.hyperfine = HyperfineTensor::axial(h.number("a_par_mhz", kDefaultHyperfine),
                                           h.number("a_perp_mhz", kDefaultHyperfine));
    }
    h.finish();
  }
  s.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
}

void parse_dissipation(Section s, RunConfig& cfg) {
  auto& d = cfg.dissipation;
  d.pump_rate_mhz = s.number("pump_rate_mhz", d.pump_rate_mhz);
  d.pump_leak_ratio = s.number("pump_leak_ratio", d.pump_leak_ratio);
  d.t1_electron_us = s.duration("t1_electron_us", d.t1_electron_us);
  d.t1_nuclear_us = s.duration("t1_nuclear_us", d.t1_nuclear_us);
  if (const auto target = s.number("calibrate_electron_polarization")) {
    if (!(*target > 0 && *target < 1)) {
      throw ConfigError(s.where("calibrate_electron_polarization") + " must lie in (0, 1)");
    }
    cfg.calibrate_electron_polarization = target;
  }
  s.finish();
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
}

SweepAxis parse_axis(Section s) {
  SweepAxis axis;
  const auto name = s.string("parameter");
  if (!name) throw ConfigError(s.where("parameter") + " is required");
  const auto which = parse_sweep_parameter(*name);
  if (!which) {
    throw ConfigError(s.where("parameter") +
                      " must be one of b_axial_gauss, e_es_mhz, a_perp_mhz, a_par_mhz");
  }
  axis.parameter = *which;
  const auto start = s.number("start");
  const auto stop = s.number("stop");
  const auto count = s.integer("count");
  if (!start || !stop || !count) throw ConfigError(s.where() + " needs start, stop and count");
  axis.start = *start;
  axis.stop = *stop;
  if (*count < 1 || *count > 1000000) throw ConfigError(s.where("count") + " must be >= 1");
  axis.count = static_cast<int>(*count);
  s.finish();
  try {
    axis.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return axis;
}

void parse_sweep(Section s, RunConfig& cfg) {
  if (s.has("axis1")) cfg.axis1 = parse_axis(s.child("axis1"));
  if (s.has("axis2")) cfg.axis2 = parse_axis(s.child("axis2"));
  cfg.checkpoint = s.boolean("checkpoint", cfg.checkpoint);
  s.finish();
  if (cfg.axis2 && !cfg.axis1) throw ConfigError(s.where() + ": axis2 given without axis1");
}

StrainDistribution parse_strain(Section& s, int nodes) {
  StrainDistribution dist;
  dist.mean_mhz = s.number("mean_mhz", 0.0);
  dist.sigma_mhz = s.number("sigma_mhz", 0.0);
  dist.n_quadrature = nodes;
  try {
    dist.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return dist;
}

void parse_temperature(Section s, RunConfig& cfg) {
  const auto nodes = s.integer("quadrature_nodes").value_or(32);
  if (nodes < 1 || nodes > 256) throw ConfigError(s.where("quadrature_nodes") + " must be in [1, 256]");
  if (!s.has("table")) throw ConfigError(s.where("table") + " is required");
  const json& table = s.raw("table");
  if (!table.is_array() || table.empty()) throw ConfigError(s.where("table") + " must be a nonempty array");
  for (std::size_t k = 0; k < table.size(); ++k) {
    Section row(table[k], s.where("table") + "[" + std::to_string(k) + "]");
    TemperatureRow r;
    const auto t = row.number("temperature_k");
    if (!t || *t < 0) throw ConfigError(row.where("temperature_k") + " is required and must be >= 0");
    r.temperature_k = *t;
    r.strain = parse_strain(row, static_cast<int>(nodes));
    row.finish();
    cfg.temperature_table.push_back(r);
  }
  s.finish();
}

std::filesystem::path existing_file(Section& s, const std::string& key,
                                    const std::filesystem::path& base_dir) {
  std::filesystem::path p = *s.string(key);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (!std::filesystem::is_regular_file(p)) {
    throw ConfigError(s.where(key) + ": file not found: " + p.string());
  }
  return p;
}

PeakSet parse_peaks(Section s) {
  PeakSet ps;
  ps.baseline = s.number("baseline", 0.0);
  if (!s.has("peaks")) throw ConfigError(s.where("peaks") + " is required");
  const json& arr = s.raw("peaks");
  if (!arr.is_array() || arr.empty()) throw ConfigError(s.where("peaks") + " must be a nonempty array");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    Section pk(arr[k], s.where("peaks") + "[" + std::to_string(k) + "]");
    const auto c = pk.number("center_mhz");
    const auto w = pk.number("fwhm_mhz");
    const auto a = pk.number("amplitude");
    if (!c || !w || !a) throw ConfigError(pk.where() + " needs center_mhz, fwhm_mhz and amplitude");
    pk.finish();
    ps.peaks.push_back({*c, *w, *a});
  }
  s.finish();
  try {
    ps.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return ps;
}

void parse_peak_fit(Section s, RunConfig& cfg, const std::filesystem::path& base_dir) {
  auto& f = cfg.peak_fit;
  if (s.has("spectrum_path")) f.spectrum_path = existing_file(s, "spectrum_path", base_dir);
  if (const auto n = s.integer("n_peaks")) {
    if (*n < 1 || *n > 64) throw ConfigError(s.where("n_peaks") + " must be in [1, 64]");
    f.n_peaks = static_cast<int>(*n);
  }
  if (s.has("m_values")) f.m_values = s.numbers("m_values");
  if (s.has("nuclear_spin_two_s")) f.nuclear_spin = parse_spin(s, "nuclear_spin_two_s");
  if (s.has("initial_peaks")) f.initial_peaks = parse_peaks(s.child("initial_peaks"));
  if (const auto it = s.integer("max_iterations")) {
    if (*it < 1) throw ConfigError(s.where("max_iterations") + " must be >= 1");
    f.max_iterations = static_cast<int>(*it);
  }
  f.invert_contrast = s.boolean("invert_contrast", false);
  s.finish();

  if (!f.m_values.empty()) {
    if (static_cast<int>(f.m_values.size()) != f.n_peaks) {
      throw ConfigError(s.where("m_values") + " needs one entry per peak");
    }
    if (!f.nuclear_spin) throw ConfigError(s.where() + ": m_values requires nuclear_spin_two_s");
    for (double m : f.m_values) {
      if (std::abs(m) > f.nuclear_spin->value() + 1e-12 ||
          std::abs(2 * m - std::round(2 * m)) > 1e-12) {
        throw ConfigError(s.where("m_values") + " must be sublevels of the nuclear spin");
      }
    }
  }
  if (f.initial_peaks && static_cast<int>(f.initial_peaks->peaks.size()) != f.n_peaks) {
    throw ConfigError(s.where("initial_peaks") + " must list n_peaks peaks");
  }
}

void parse_strain_fit(Section s, RunConfig& cfg, const std::filesystem::path& base_dir) {
  auto& f = cfg.strain_fit;
  if (s.has("spectrum_path")) f.spectrum_path = existing_file(s, "spectrum_path", base_dir);
  f.d_es_mhz = s.number("d_es_mhz", f.d_es_mhz);
  f.natural_fwhm_mhz = s.number("natural_fwhm_mhz", f.natural_fwhm_mhz);
  f.fit_d_es = s.boolean("fit_d_es", f.fit_d_es);
  if (auto w = s.range("window_mhz")) f.window_mhz = *w;
  if (auto c = s.range("central_range_mhz")) f.central_range_mhz = *c;
  if (const auto it = s.integer("max_iterations")) {
    if (*it < 1) throw ConfigError(s.where("max_iterations") + " must be >= 1");
    f.max_iterations = static_cast<int>(*it);
  }
  f.invert_contrast = s.boolean("invert_contrast", false);
  s.finish();
  if (!(f.d_es_mhz > 0)) throw ConfigError(s.where("d_es_mhz") + " must be positive");
  if (!(f.natural_fwhm_mhz > 0)) throw ConfigError(s.where("natural_fwhm_mhz") + " must be positive");
}

void parse_synth(Section s, RunConfig& cfg) {
  auto& y = cfg.synth;
  y.configured = true;
  const auto kind = s.string("kind").value_or("odmr");
  if (kind == "odmr") {
    y.kind = SynthKind::Odmr;
  } else if (kind == "esodmr") {
    y.kind = SynthKind::Esodmr;
  } else {
    throw ConfigError(s.where("kind") + " must be \"odmr\" or \"esodmr\"");
  }
  if (!s.has("grid")) throw ConfigError(s.where("grid") + " is required");
  {
    Section g = s.child("grid");
    const auto start = g.number("start_mhz");
    const auto stop = g.number("stop_mhz");
    const auto count = g.integer("count");
    if (!start || !stop || !count) throw ConfigError(g.where() + " needs start_mhz, stop_mhz and count");
    if (!(*start < *stop) || *count < static_cast<long long>(OdmrSpectrum::kMinPoints) || *count > 10000000) {
      throw ConfigError(g.where() + ": need start < stop and count >= 8");
    }
    y.grid_start_mhz = *start;
    y.grid_stop_mhz = *stop;
    y.grid_count = static_cast<int>(*count);
    g.finish();
  }
  y.noise_std = s.number("noise_std", 0.0);
  if (!(y.noise_std >= 0)) throw ConfigError(s.where("noise_std") + " must be >= 0");

  if (y.kind == SynthKind::Odmr) {
    const double baseline = s.number("baseline", 0.0);
    if (!s.has("peaks")) throw ConfigError(s.where("peaks") + " is required for kind odmr");
    json wrapper = {{"baseline", baseline}, {"peaks", s.raw("peaks")}};
    y.peaks = parse_peaks(Section(wrapper, s.where()));
  } else {
    if (!s.has("strain")) throw ConfigError(s.where("strain") + " is required for kind esodmr");
    Section st = s.child("strain");
    y.strain = parse_strain(st, 32);
    st.finish();
    y.d_es_mhz = s.number("d_es_mhz", y.d_es_mhz);
    y.natural_fwhm_mhz = s.number("natural_fwhm_mhz", y.natural_fwhm_mhz);
    y.amplitude = s.number("amplitude", y.amplitude);
    if (!(y.natural_fwhm_mhz > 0)) throw ConfigError(s.where("natural_fwhm_mhz") + " must be positive");
    if (!(y.amplitude >= 0)) throw ConfigError(s.where("amplitude") + " must be >= 0");
  }
  s.finish();
}

}  // namespace

std::vector<double> SynthSettings::grid() const {
  std::vector<double> g(grid_count);
  for (int k = 0; k < grid_count; ++k) {
    g[k] = grid_start_mhz + (grid_stop_mhz - grid_start_mhz) * k / (grid_count - 1);
  }
  return g;
}

std::string fingerprint(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg;
  Section root(doc, "");
  if (root.has("system")) parse_system(root.child("system"), cfg);
  if (root.has("dissipation")) parse_dissipation(root.child("dissipation"), cfg);
  if (root.has("sweep")) parse_sweep(root.child("sweep"), cfg);
  if (root.has("temperature")) parse_temperature(root.child("temperature"), cfg);
  if (root.has("peak_fit")) parse_peak_fit(root.child("peak_fit"), cfg, base_dir);
  if (root.has("strain_fit")) parse_strain_fit(root.child("strain_fit"), cfg, base_dir);
  if (root.has("synth")) parse_synth(root.child("synth"), cfg);
  if (const auto seed = root.integer("seed")) {
    if (*seed < 0) throw ConfigError("seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*seed);
  }
  root.finish();
  cfg.canonical = doc.dump();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

}  // namespace nvpol
