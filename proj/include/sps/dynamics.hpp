#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "sps/core.hpp"
#include "sps/envelope.hpp"

namespace sps {

/// Qubit state sampled on the drive grid. Frame rotates at the drive
/// carrier; coherence is <sigma_-> = rho_10.
struct QubitTrajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd bloch;        ///< N x 3: sx, sy, sz
  Eigen::MatrixXd populations;  ///< N x levels
  Eigen::VectorXcd coherence;
  Eigen::MatrixXcd final_state;
  int levels = 2;

  Eigen::Index size() const { return times.size(); }
  double leakage() const { return levels > 2 ? populations(size() - 1, 2) : 0.0; }
};

/// Closed-form Rabi parameters; omega, gamma_s and omega_m in Hz.
struct RabiParams {
  double omega = 0.0;
  double gamma_s = 0.0;
  double omega_m = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;

  /// Throws std::domain_error in the overdamped regime.
  static RabiParams from(double omega, const RateSet& rates);
};

class StepSizeError : public std::invalid_argument {
 public:
  StepSizeError(const std::string& what, double suggested) : std::invalid_argument(what), suggested_dt(suggested) {}
  double suggested_dt;
};

/// Rabi rate (Hz) produced by a field amplitude a (sqrt(photons/s)):
/// Omega = 2 sqrt(Gamma_r) a in angular units.
double rabi_from_amplitude(double a, double gamma_r);
double amplitude_from_rabi(double omega, double gamma_r);

/// Largest admissible step for the given drive peak, rates and detuning.
double max_stable_dt(double omega_peak, double detuning, const RateSet& rates,
                     double anharm = 0.0);

/// Driven-damped two-level evolution, fixed-step RK4. The step is refined to
/// divide the drive grid; results are reported on the drive grid. Starts in
/// the ground state unless `initial` (2x2) is given.
QubitTrajectory simulate_bloch(const ComplexEnvelope& drive, double detuning, const RateSet& rates,
                               double dt, const std::optional<Eigen::MatrixXcd>& initial = {});

/// Three-level version: the 1-2 transition couples with sqrt(2) Omega and
/// sits anharm below; level 2 decays at 2 gamma_1.
QubitTrajectory simulate_three_level(const ComplexEnvelope& drive, double detuning, double anharm,
                                     const RateSet& rates, double dt,
                                     const std::optional<Eigen::MatrixXcd>& initial = {});

/// (sigma_y, sigma_z) after a resonant constant drive of duration tau from
/// the ground state.
std::pair<double, double> rabi_analytic(double tau, const RabiParams& rabi, const RateSet& rates);

/// Steady-state <sigma_-> for a constant drive Omega (Hz).
std::complex<double> steady_state_sigma_minus(double omega, double detuning, const RateSet& rates);

/// CSV: time,sx,sy,sz,re_sm,im_sm
void write_trajectory_csv(const std::string& path, const QubitTrajectory& traj);

}  // namespace sps
