#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "sps/config.hpp"

namespace sps {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitWarnings = 3;

struct RunOptions {
  std::string out_dir = ".";
  int threads = 1;
};

/// What a subcommand produced. `report` is also written to report.json in
/// the output directory; `files` lists everything written, report included.
struct CommandResult {
  nlohmann::json report;
  std::vector<std::string> warnings;
  std::vector<std::string> files;

  int exit_code() const { return warnings.empty() ? kExitOk : kExitWarnings; }
};

/// Pi pulse through the dynamics, cancellation of the reflected drive, photon
/// accounting and leakage numbers. Envelope CSVs plus report.json.
CommandResult cmd_emit(const ExperimentConfig& config, const RunOptions& options);

/// Shots for each configured pulse area, field moments, g2(0), maximum
/// likelihood state and its Wigner grid.
CommandResult cmd_tomography(const ExperimentConfig& config, const RunOptions& options);

/// Flux sweep of reflection traces with impedance mismatch: fit, compensate,
/// refit, then fit the mismatch phase against frequency.
CommandResult cmd_spectroscopy(const ExperimentConfig& config, const RunOptions& options);

/// Interleaved two-point decay timeline and its slot-by-slot estimates.
CommandResult cmd_stability(const ExperimentConfig& config, const RunOptions& options);

/// Constant-drive Rabi sweep of I and P with a joint damped-sine fit.
CommandResult cmd_rabi(const ExperimentConfig& config, const RunOptions& options);

}  // namespace sps
