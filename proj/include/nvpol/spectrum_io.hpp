#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "nvpol/odmr.hpp"

namespace nvpol {

// Two whitespace-separated columns (frequency_mhz, contrast); '#' starts a comment line.
// With `invert`, raw fluorescence-change data (negative dips) is negated on ingestion.
OdmrSpectrum parse_spectrum(std::istream& in, bool invert = false);
OdmrSpectrum read_spectrum(const std::filesystem::path& path, bool invert = false);

void write_spectrum(const std::filesystem::path& path, const OdmrSpectrum& s,
                    const std::string& comment = {});

}  // namespace nvpol
