#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "sps/core.hpp"
#include "sps/density_matrix.hpp"
#include "sps/envelope.hpp"

namespace sps {

struct MeasurementConfig {
  double gain = 1.0;            ///< power gain of the chain
  double noise_photons = 2.0;   ///< added noise quanta per mode
  double sample_rate = 50e6;    ///< digitizer rate, Hz
  long n_shots = 1000000;
  std::uint64_t seed = 1;
  bool include_vacuum = true;   ///< add the half quantum of vacuum noise
  double frequency = 5.510e9;   ///< carrier for the voltage bridge
  double z0 = 50.0;
  int threads = 1;

  double total_noise() const { return noise_photons + (include_vacuum ? 0.5 : 0.0); }
  void validate() const;
};

/// Mode-matched complex amplitudes in photon-amplitude units.
struct ShotSet {
  Eigen::VectorXcd signal;
  Eigen::VectorXcd reference;
  double filter_rate = 0.0;

  Eigen::Index size() const { return signal.size(); }
  void validate() const;
};

/// Normalized mode filter f(t) = sqrt(G) e^{-G t / 2}, G = 2 pi filter_rate,
/// sampled at t = k dt and rescaled so sum f^2 dt = 1.
Eigen::VectorXd mode_filter(double filter_rate, double dt, Eigen::Index n);

/// Shortest record accepted by mode_match: 5 / (2 pi filter_rate).
double min_record_duration(double filter_rate);

/// S = sum f(t_k) V_k dt / sqrt(gain 2 Z0 hbar omega), time measured from the
/// record start. Throws std::domain_error for a record shorter than
/// min_record_duration.
cd mode_match(const ComplexEnvelope& record, double filter_rate, double gain, double frequency,
              double z0);

/// Shot records V = sqrt(gain) sqrt(2 Z0 hbar omega) (e(t) + n(t)) on the
/// digitizer grid, mode-matched; reference shots use e = 0. n(t) is white
/// circular Gaussian with total_noise() quanta per mode. Deterministic in
/// config.seed for any thread count.
ShotSet synthesize_shots(const ComplexEnvelope& emission, const MeasurementConfig& config,
                         double filter_rate);

/// Post-pulse state of the filtered emission mode: <a>, <a^dag a> from free
/// decay of `qubit` (2x2 or 3x3, pulse end at t = 0), no two-photon part.
DensityMatrix emission_mode_state(const Eigen::MatrixXcd& qubit, const RateSet& rates,
                                  double filter_rate, double detuning = 0.0);

/// Heterodyne shots of a mode state: Husimi samples plus amplifier noise so
/// that the reference carries total_noise() quanta. Requires a total noise of
/// at least one quantum (the heterodyne vacuum).
ShotSet synthesize_state_shots(const DensityMatrix& mode, const MeasurementConfig& config,
                               double filter_rate);

/// Raw moments <(S*)^n S^k>, n + k <= 4.
Eigen::Matrix<cd, 5, 5> raw_moments(const Eigen::VectorXcd& shots);

/// Removes Gaussian phase-insensitive noise with <h^dag h> = noise.
Eigen::Matrix<cd, 5, 5> deconvolve_moments(const Eigen::Matrix<cd, 5, 5>& raw, double noise);

/// Reference-subtracted field moments with bootstrap error bars. Each
/// bootstrap draw has its own seed; `threads` only changes the speed.
MomentSet extract_field_moments(const ShotSet& shots, int max_order = kMaxMomentOrder,
                                int bootstrap = 50, std::uint64_t seed = 7, int threads = 1);

void write_shots_csv(const std::string& path, const ShotSet& shots);

}  // namespace sps
