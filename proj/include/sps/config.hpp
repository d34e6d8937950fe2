#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sps/core.hpp"
#include "sps/measurement.hpp"
#include "sps/spectroscopy.hpp"
#include "sps/stability.hpp"

namespace sps {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PulseBlock {
  double duration = 50e-9;
  double sigma = 0.0;  ///< <= 0: duration / 6
  double dt = 0.5e-9;
  double detuning = 0.0;
  double free_decay = 10e-6;   ///< recorded after the pulse
  bool three_level = true;
  double attenuation = 0.1;    ///< cancellation-port coupler
  double amp_error = 0.021;    ///< deliberate amplitude error for the analytic check
};

struct TomographyBlock {
  std::vector<double> areas{3.141592653589793, 1.5707963267948966};  ///< 0 means no pulse
  double filter_rate = 0.0;  ///< <= 0: gamma_1 at the sweet spot
  std::string route = "state";  ///< "state" or "records"
  int bootstrap = 50;
  double wigner_extent = 2.0;
  int wigner_points = 41;
  bool write_shots = false;
};

struct SpectroscopyBlock {
  double f_min = 4.9e9;
  double f_max = 5.5e9;
  int flux_points = 31;
  double span = 6e6;        ///< probe span around each f01
  int trace_points = 201;
  double noise = 0.01;
  MismatchParams mismatch{0.14, (1.0 - 0.14 * 0.14) * 0.97 * 0.97, 5e-9};
  double beta = 0.97;
};

struct RabiBlock {
  double omega = 5e6;     ///< Hz
  double max_tau = 1.4e-6;
  double tau_step = 2e-9;
  double noise = 0.01;
};

struct ExperimentConfig {
  DeviceParams device;
  MeasurementConfig measurement;
  PulseBlock pulse;
  TomographyBlock tomography;
  SpectroscopyBlock spectroscopy;
  StabilityConfig stability = StabilityConfig::paper();
  RabiBlock rabi;
  std::uint64_t seed = 1;

  /// Rates at the sweet spot: gamma_r, gamma_n_sweet and no pure dephasing.
  RateSet sweet_spot_rates() const;
  void validate() const;
};

/// Parses a JSON document. Every block is optional; unknown keys, wrong types
/// and invalid values raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace sps
