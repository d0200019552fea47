#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "perfctl/config.hpp"

namespace perfctl {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  kExitSolver = 3,
  kExitInvariant = 4,
};

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  /// Artifact root. Falls back to $PERFCTL_OUT_DIR, then ./artifacts.
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
};

/// Runs the configured experiment once per seed, each into a fresh artifact
/// directory. Returns one of the exit codes above.
int run_experiment(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Diff report of two history files on `out`. `delta`, when set, adds a
/// within/outside line for the terminal distance.
int compare_command(const std::string& history_a, const std::string& history_b,
                    std::optional<double> delta, std::ostream& out, std::ostream& err);

std::vector<std::string> fixture_names();

/// Throws ConfigError listing the valid names for an unknown one.
ExperimentConfig fixture(const std::string& name);

/// beta * sqrt(sum eps_t^2) / lambda with eps_t in closed form for the
/// isotropic Gaussian and uniform-ball families.
double closed_form_alpha1(const ExperimentConfig& config);

/// Full command-line entry point (run, compare, emit-fixture).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace perfctl
