#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "hardedge/experiments.hpp"

namespace hardedge {

/// Exit codes: 0 success, 1 a checked margin failed, 2 usage or schema error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

/// Built-in configuration for an experiment subcommand ("smoothed",
/// "coupled", "universality", "complex-exact", "condition", "nonsquare").
ExperimentConfig default_config(const std::string& experiment);

/// Calibration constants stored as a flat JSON object of numbers.
std::map<std::string, double> load_calibration(const std::filesystem::path& path);
void save_calibration(const std::map<std::string, double>& values, const std::filesystem::path& path);

struct LindebergDefaults {
  int n = 64;
  int trials = 2000;
  double r = 1.0;
  double a = 1.5;
  double rho_exponent = 1.25;  // rho = N^-rho_exponent
  double eps = 0.2;
};

/// Smallest C >= 0 with delta_hat <= comparison budget for a run on `seed`.
double calibrate_lindeberg_c(const LindebergDefaults& d, std::uint64_t seed, int threads = 1);

}  // namespace hardedge
