#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nvpol {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitNumerical = 3,
  kExitPartialSweep = 4,
};

struct CommandOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;   // overrides the config seed
  int threads = 1;
  std::optional<std::filesystem::path> input;  // spectrum for fit-odmr / fit-strain
};

const std::vector<std::string>& command_names();

// Runs one subcommand in-process. Returns the exit code; on failure a one-line
// JSON error record is written to `err`. Input errors leave no output files.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& err);

}  // namespace nvpol
