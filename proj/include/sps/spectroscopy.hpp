#pragma once

#include <complex>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace sps {

struct ReflectionTrace {
  Eigen::VectorXd probe_freqs;  ///< Hz, strictly increasing
  Eigen::VectorXcd r_values;
  bool weak_probe = true;

  Eigen::Index size() const { return probe_freqs.size(); }
  /// Throws std::invalid_argument on length mismatch, non-finite values or
  /// non-increasing frequencies.
  void validate() const;
};

/// r1, the combined t1^2 beta^2 factor and the propagation delay.
struct MismatchParams {
  double r1 = 0.0;
  double t1beta = 1.0;
  double tau_delay = 0.0;  ///< s
};

/// r = 1 - i gamma_r e^{i phi} / (delta + i gamma_2), all rates in Hz.
std::complex<double> reflection_model(double delta, double gamma_r, double gamma_2, double phi);

/// Samples reflection_model at f - f01 and adds circular complex Gaussian
/// noise with standard deviation `noise` per quadrature.
ReflectionTrace synthetic_trace(const Eigen::VectorXd& freqs, double f01, double gamma_r,
                                double gamma_2, double phi, double noise, std::uint64_t seed);

struct ReflectionFitOptions {
  bool fix_phase = false;  ///< constrain phi = 0 (compensated traces)
};

struct ReflectionFit {
  double f01 = 0.0;
  double gamma_r = 0.0;
  double gamma_2 = 0.0;
  double phi = 0.0;
  Eigen::Vector4d errors = Eigen::Vector4d::Zero();  ///< same order as above
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double residual_norm = 0.0;
  bool converged = false;
  bool degenerate = false;   ///< no resonance found
  bool narrow_span = false;  ///< span below 10 linewidths
};

/// Complex least squares of the model above. Throws std::invalid_argument for
/// fewer than 50 points.
ReflectionFit fit_reflection(const ReflectionTrace& trace, const ReflectionFitOptions& options = {});

/// tan(phi) = r1 sin(2 phi0) / (t1beta + r1 cos(2 phi0)), phi0 = 2 pi f tau.
double phase_model(double f, const MismatchParams& mismatch);

struct PhaseCurveFit {
  MismatchParams params;
  double ratio = 0.0;  ///< r1 / t1beta, the identifiable combination
  double ratio_error = 0.0;
  double tau_error = 0.0;
  bool converged = false;
  bool underdetermined = false;
};

/// Fits (r1 / t1beta, tau) and splits the ratio using t1 = sqrt(1 - r1^2)
/// and the supplied attenuation beta.
PhaseCurveFit fit_phase_curve(const Eigen::VectorXd& freqs, const Eigen::VectorXd& phis,
                              double beta = 1.0);

/// 1 - (1 - r_raw) e^{-i phi}; inverts the distortion of reflection_model.
std::complex<double> compensate_mismatch(std::complex<double> r_raw, double phi);
ReflectionTrace compensate_trace(const ReflectionTrace& trace, double phi);

ReflectionTrace read_trace_csv(const std::string& path);
void write_trace_csv(const std::string& path, const ReflectionTrace& trace);

}  // namespace sps
