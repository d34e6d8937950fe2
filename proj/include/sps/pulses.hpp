#pragma once

#include "sps/core.hpp"
#include "sps/dynamics.hpp"
#include "sps/envelope.hpp"

namespace sps {

/// Truncated Gaussian drive. Samples t_k = k dt, k = 0..N with N dt = duration,
/// centred at duration / 2; sigma <= 0 selects duration / 6. The amplitude is
/// normalized so that the trapezoidal integral of Omega = 2 sqrt(Gamma_r) a
/// equals `area`. Throws std::domain_error for area <= 0 and
/// std::invalid_argument for a bad grid or duration < 4 sigma.
ComplexEnvelope gaussian_pulse(double duration, double sigma, double area, double detuning,
                               double dt, double gamma_r);

/// Constant drive of Rabi rate omega (Hz) for `duration`, sampled every dt.
ComplexEnvelope constant_drive(double omega, double duration, double dt, double gamma_r);

/// Appends `extra` seconds of zeros (rounded up to whole samples).
ComplexEnvelope pad_envelope(const ComplexEnvelope& env, double extra);

/// The -i sqrt(Gamma_r) <sigma_-(t)> emission term on the trajectory grid.
ComplexEnvelope emitted_field(const QubitTrajectory& traj, double gamma_r);

/// Full reflected field a_in - i sqrt(Gamma_r) <sigma_->; grids must agree.
ComplexEnvelope reflected_field(const ComplexEnvelope& drive, const QubitTrajectory& traj,
                                double gamma_r);

struct CancellationSetting {
  double amp_scale = 1.0;
  double phase = 0.0;  ///< rad
  double delay = 0.0;  ///< s
};

/// Band-limited delay y(t) = x(t - delay) by an FFT phase ramp on a
/// zero-padded copy. delay = 0 returns the input unchanged.
ComplexEnvelope delayed(const ComplexEnvelope& env, double delay);

/// reflected + amp_scale e^{i phase} delayed(original, delay).
/// Throws FormatError when the grids differ.
ComplexEnvelope apply_cancellation(const ComplexEnvelope& reflected, const ComplexEnvelope& original,
                                   const CancellationSetting& setting);

struct CancellationCalibration {
  CancellationSetting setting;
  bool converged = false;
  int iterations = 0;
  double residual_fraction = 0.0;  ///< residual energy / original energy
};

/// Simplex search over (amp_scale, phase, delay) minimizing the residual
/// energy; at most 500 iterations, relative tolerance 1e-10.
CancellationCalibration calibrate_cancellation(const ComplexEnvelope& reflected,
                                               const ComplexEnvelope& original,
                                               const CancellationSetting& init);

/// 10 log10(residual / input).
double suppression_db(double residual_energy, double input_energy);

/// V = sqrt(2 Z0 hbar omega) a for a field in sqrt(photons/s).
ComplexEnvelope voltage_from_field(const ComplexEnvelope& field, double frequency, double z0);

/// Trapezoidal photon number 1/(2 Z0 hbar omega) int (|V|^2 - |V_N|^2) dt over
/// [t0, t1], with interpolated end points.
double photon_number(const ComplexEnvelope& v, cd v_noise, double frequency, double z0, double t0,
                     double t1);

/// n_leak_meas / n_q_meas * Gamma_r / (8 Gamma_2).
double leakage_estimate(double n_leak_meas, double n_q_meas, const RateSet& rates);

}  // namespace sps
