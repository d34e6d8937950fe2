#pragma once

#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace sps {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kHbar = 1.054571817e-34;  // J s

/// How flux arguments are expressed: in units of the flux quantum, or as the
/// reduced phase 2*pi*Phi/Phi0.
enum class FluxUnit { kFluxQuantum, kPhase };

/// Static description of the qubit and the line it terminates.
///
/// Every frequency and rate is an ordinary frequency in Hz (the value of
/// omega/2pi or Gamma/2pi). Angular factors are applied inside formulas only.
struct DeviceParams {
  double f01_max = 5.510e9;         ///< qubit frequency at zero flux
  double anharm = 0.251e9;          ///< anharmonicity, positive
  double gamma_r = 270e3;           ///< radiative decay into the line
  double gamma_n_sweet = 106e3;     ///< non-radiative decay at zero flux
  double flux_noise_sqrt_A = 2e-6;  ///< sqrt of the 1/f amplitude, in Phi0
  double f_ir = 5e-3;               ///< infrared cutoff of the 1/f spectrum
  double z0 = 50.0;                 ///< line impedance, Ohm
  FluxUnit phi0_convention = FluxUnit::kFluxQuantum;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

/// Decay and decoherence rates of the qubit (Hz).
struct RateSet {
  double gamma_1 = 0.0;
  double gamma_2 = 0.0;
  double gamma_phi = 0.0;
  double gamma_r = 0.0;
  double gamma_n = 0.0;

  /// Builds a consistent set: gamma_1 = gamma_r + gamma_n and
  /// gamma_2 = gamma_1 / 2 + gamma_phi.
  static RateSet from_components(double gamma_r, double gamma_n, double gamma_phi);

  /// Builds a set from the measured (gamma_r, gamma_2, gamma_phi) triple,
  /// attributing the rest of gamma_1 to non-radiative decay.
  static RateSet from_radiative_and_coherence(double gamma_r, double gamma_2, double gamma_phi);

  RateSet with_gamma_phi(double gamma_phi) const;
  RateSet without_decoherence() const;

  bool is_consistent(double rel_tol = 1e-9) const;
};

/// Table 1 of the device: gamma_r = 270 kHz, gamma_2 = 188 kHz, no pure
/// dephasing at the sweet spot, so gamma_1 = 376 kHz and gamma_n = 106 kHz.
RateSet table1_rates();

struct EfficiencyBudget {
  double eta_q = 0.0;  ///< intrinsic quantum efficiency
  double eta_p = 0.0;  ///< loss to pure dephasing
  double eta_n = 0.0;  ///< loss to non-radiative decay
  double sum() const { return eta_q + eta_p + eta_n; }
};

/// Non-radiative decay as a function of flux (Phi0 units).
using GammaNModel = std::function<double(double phi)>;

/// Symmetric-SQUID transmon dispersion:
/// f(phi) = (f01_max + anharm) * sqrt|cos(pi phi)| - anharm.
/// Throws std::domain_error for |phi| > 0.45 Phi0.
double flux_to_frequency(double phi, const DeviceParams& params);

/// Analytic df/dphi in Hz per Phi0 (per flux quantum whatever the input
/// convention).
double flux_slope(double phi, const DeviceParams& params);

/// Inverse of flux_to_frequency on [0, 0.45]; returns the non-negative root.
double frequency_to_flux(double f, const DeviceParams& params);

/// Linear ramp from gamma_n_sweet at zero detuning down to zero at
/// `cutoff_detuning` below f01_max.
GammaNModel linear_gamma_n_model(const DeviceParams& params, double cutoff_detuning);

/// Default non-radiative model, linear_gamma_n_model with a 20 MHz cutoff.
GammaNModel default_gamma_n_model(const DeviceParams& params);
inline constexpr double kDefaultGammaNCutoff = 20e6;

/// 1/f flux-noise dephasing, Hz:
/// gamma_phi = sqrt(A_Phi |ln(2 pi f_IR t)|) |df/dphi|.
double flux_noise_dephasing(double phi, double t_phase, const DeviceParams& params);

/// Rates at a flux bias. gamma_n comes from `gamma_n_model` and gamma_phi from
/// the 1/f formula evaluated at observation time `t_phase` (s).
RateSet rates_at_flux(double phi, double t_phase, const DeviceParams& params,
                      const GammaNModel& gamma_n_model);

struct DephasingTimeSolution {
  double t_phase = 0.0;
  double mean_gamma_phi = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Solves t = 1 / (2 pi <gamma_phi>(t)) by fixed-point iteration over the given
/// flux points (<= 50 iterations, relative tolerance 1e-3).
DephasingTimeSolution self_consistent_dephasing_time(std::span<const double> phis,
                                                     const DeviceParams& params);

/// eta_q = gamma_r / (2 gamma_2), eta_p = gamma_phi / gamma_2,
/// eta_n = gamma_n / (2 gamma_2). Throws std::domain_error if gamma_2 <= 0.
EfficiencyBudget efficiency_decomposition(const RateSet& rates);

}  // namespace sps
