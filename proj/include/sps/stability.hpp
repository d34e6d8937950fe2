#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sps/core.hpp"

namespace sps {

/// Symmetric telegraph fluctuator dispersively coupled to the qubit.
/// gamma_switch is the switching rate in 1/s (mean dwell 1 / gamma_switch).
struct TelegraphTLS {
  double gamma_switch = 0.0;
  double chi = 0.0;        ///< Hz, dispersive shift while in state 1
  double g = 0.0;          ///< Hz, optional
  double delta_tls = 0.0;  ///< Hz, optional
  int state = 0;

  /// Throws std::invalid_argument for a negative rate or, when chi, g and
  /// delta_tls are all non-zero, for chi * delta_tls != g^2 (1e-6 relative).
  void validate() const;
};

/// Switch times of the continuous-time chain on [0, duration).
std::vector<double> telegraph_switch_times(double duration, const TelegraphTLS& tls,
                                           std::uint64_t seed);

/// State of the chain at t given its switch times and initial state.
int telegraph_state_at(double t, const std::vector<double>& switches, int initial_state);

/// The chain sampled at k dt, k = 0 .. floor(duration / dt) - 1.
std::vector<std::uint8_t> simulate_telegraph(double duration, const TelegraphTLS& tls, double dt,
                                             std::uint64_t seed);

struct TlsRelaxation {
  double rate = 0.0;
  bool regime_warning = false;  ///< g > delta / 5
};

/// (g / delta)^2 gamma_switch.
TlsRelaxation tls_relaxation_contribution(const TelegraphTLS& tls);

struct FluxJumpModel {
  double rate = 2.0 / (136.0 * 3600.0);  ///< jumps per second
  double sigma = 7.8e-5;                 ///< Phi0, normal step size
};

/// A fluctuator attached to one of the two interleaved flux points. While in
/// state 1 it shifts the qubit by chi and adds min(2 chi^2 / gamma, cap) of
/// pure dephasing (angular rates inside, Hz out).
struct StabilityTls {
  TelegraphTLS tls;
  int flux_point = 0;
  double dephasing_cap = 125e3;  ///< Hz
};

struct StabilityConfig {
  double duration = 136.0 * 3600.0;  ///< s
  int slots = 200;                   ///< even
  std::array<double, 2> flux_points{0.0, 0.09};
  std::vector<StabilityTls> tls;
  FluxJumpModel jumps;
  bool flux_drift = true;        ///< 1/f drift of the flux bias
  double record_dt = 20e-9;
  int record_points = 300;
  double power_noise = 0.01;     ///< per point
  double quadrature_noise = 0.01;  ///< per quadrature and point
  double gamma_n_cutoff = kDefaultGammaNCutoff;
  int threads = 1;

  /// Two fluctuators: 34.7 uHz at the sweet spot, 127.9 uHz at 0.09 Phi0,
  /// both 40 kHz shifts.
  static StabilityConfig paper();
  void validate() const;
};

struct DecayRecord {
  Eigen::VectorXd times;
  Eigen::VectorXd power;
  Eigen::VectorXcd quadrature;
};

struct SlotTruth {
  double gamma_1 = 0.0;
  double gamma_2 = 0.0;
  double gamma_phi = 0.0;
  double freq_offset = 0.0;
  double eta_p = 0.0;
  double flux_offset = 0.0;  ///< Phi0, drift plus jumps
};

struct FrequencyEstimate {
  double offset = 0.0;  ///< Hz, qubit minus drive
  double error = 0.0;
  bool ambiguous = false;
};

struct DecayEstimate {
  double gamma_1 = 0.0, gamma_1_err = 0.0;
  double gamma_2 = 0.0, gamma_2_err = 0.0;
  double gamma_phi = 0.0, gamma_phi_err = 0.0;
  double freq_offset = 0.0, freq_offset_err = 0.0;
  double eta_p = 0.0, eta_p_err = 0.0;
  bool fit_ok = false;
};

struct StabilityTimeline {
  std::vector<double> wall_times;
  std::vector<int> flux_point_id;
  std::vector<SlotTruth> truth;
  std::vector<DecayRecord> records;
  std::vector<DecayEstimate> estimates;  ///< filled by analyze_timeline
  std::vector<std::vector<std::uint8_t>> tls_states;  ///< per fluctuator, per slot
  int jumps = 0;
};

/// Interleaved slots alternating between the two flux points; per slot the
/// truth combines fluctuator shifts and dephasing, 1/f flux drift, Poisson
/// flux jumps and the flux-dependent rates, and a noisy decay record.
StabilityTimeline generate_stability_dataset(const StabilityConfig& config,
                                             const DeviceParams& params, std::uint64_t seed);

/// Exponential fit of the power trace for gamma_1 and a complex fit of the
/// quadrature trace for gamma_2 and the frequency offset; gamma_phi =
/// gamma_2 - gamma_1 / 2 is kept even when negative.
DecayEstimate estimate_rates_from_decay(const Eigen::VectorXd& times, const Eigen::VectorXd& power,
                                        const Eigen::VectorXcd& quadrature);

/// Weighted linear fit of the unwrapped phase (points with |Q| >= 0.1 |Q(0)|).
FrequencyEstimate frequency_from_phase(const Eigen::VectorXd& times,
                                       const Eigen::VectorXcd& quadrature);

void analyze_timeline(StabilityTimeline& timeline, int threads = 1);

void write_timeline_csv(const std::string& path, const StabilityTimeline& timeline);

}  // namespace sps
