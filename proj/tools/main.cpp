#include <iostream>

#include <CLI11.hpp>

#include "nvpol/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nvpol: steady-state nuclear polarization at the NV excited-state anti-crossing"};
  app.require_subcommand(1);
  app.fallthrough();

  nvpol::CommandOptions opts;
  std::string config, out_dir = ".", input;
  std::uint64_t seed = 0;

  app.add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (created if missing)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed, overrides the config");
  app.add_option("--threads", opts.threads, "worker threads for sweeps")->check(CLI::Range(1, 1024));

  const std::pair<const char*, const char*> commands[] = {
      {"steady", "steady-state density matrix and polarizations"},
      {"sweep-b", "nuclear polarization versus axial field"},
      {"scan-2d", "polarization map over field and strain"},
      {"temperature", "strain-averaged polarization per temperature row"},
      {"fit-odmr", "multi-Lorentzian fit and polarization estimate"},
      {"fit-strain", "Gaussian strain distribution fit of a zero-field spectrum"},
      {"synth", "synthetic ODMR or ESODMR spectrum"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    const std::string n = name;
    if (n == "fit-odmr" || n == "fit-strain") {
      sub->add_option("--input", input, "spectrum file, overrides the config path");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : nvpol::kExitInput;
  }

  opts.config = config;
  opts.out_dir = out_dir;
  if (seed_opt->count() > 0) opts.seed = seed;
  if (!input.empty()) opts.input = input;
  const std::string name = app.get_subcommands().front()->get_name();
  return nvpol::run_command(name, opts, std::cerr);
}
