#include "nvpol/spectrum_io.hpp"

#include <fstream>
#include <sstream>

#include "nvpol/format.hpp"

namespace nvpol {

OdmrSpectrum parse_spectrum(std::istream& in, bool invert) {
  std::vector<double> freq, contrast;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, extra;
    fields >> a >> b;
    if (b.empty() || (fields >> extra)) {
      throw SpectrumError("spectrum line " + std::to_string(lineno) + ": expected two columns");
    }
    try {
      freq.push_back(parse_double(a));
      const double c = parse_double(b);
      contrast.push_back(invert ? -c : c);
    } catch (const std::invalid_argument& e) {
      throw SpectrumError("spectrum line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return OdmrSpectrum(std::move(freq), std::move(contrast));
}

OdmrSpectrum read_spectrum(const std::filesystem::path& path, bool invert) {
  std::ifstream in(path);
  if (!in) throw SpectrumError("cannot open spectrum file " + path.string());
  return parse_spectrum(in, invert);
}

void write_spectrum(const std::filesystem::path& path, const OdmrSpectrum& s,
                    const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "# frequency_mhz contrast\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    out << format_double(s.frequency()[k]) << ' ' << format_double(s.contrast()[k]) << '\n';
  }
}

}  // namespace nvpol
