#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "sps/dynamics.hpp"
#include "sps/pulses.hpp"

using namespace sps;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXcd excited() {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
  rho(1, 1) = 1.0;
  return rho;
}

}  // namespace

TEST(dynamics, free_decay_from_excited_state) {
  const RateSet r = table1_rates();
  const ComplexEnvelope idle = ComplexEnvelope::zeros(1e-9, 3001);
  const QubitTrajectory tr = simulate_bloch(idle, 0.0, r, 1e-9, excited());
  for (Eigen::Index i = 0; i < tr.size(); i += 50) {
    const double expect = -1.0 + 2.0 * std::exp(-2 * kPi * r.gamma_1 * tr.times[i]);
    EXPECT_NEAR(tr.bloch(i, 2), expect, 1e-4);
  }
}

class RabiOracle : public ::testing::TestWithParam<double> {};

TEST_P(RabiOracle, rk4_follows_closed_form) {
  const RateSet r = table1_rates();
  const double omega = GetParam() * r.gamma_1;
  const ComplexEnvelope drive = constant_drive(omega, 3e-6, 1e-9, r.gamma_r);
  const QubitTrajectory tr = simulate_bloch(drive, 0.0, r, std::min(1e-9, max_stable_dt(omega, 0, r)));
  const RabiParams rp = RabiParams::from(omega, r);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tr.size(); ++i) {
    const auto [sy, sz] = rabi_analytic(tr.times[i], rp, r);
    worst = std::max({worst, std::abs(tr.bloch(i, 1) - sy), std::abs(tr.bloch(i, 2) - sz)});
  }
  EXPECT_LT(worst, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(dynamics, RabiOracle, ::testing::Values(2.0, 5.0, 10.0));

TEST(dynamics, closed_form_initial_and_steady_values) {
  const RateSet r = table1_rates();
  const double omega = 3e6;
  const RabiParams rp = RabiParams::from(omega, r);
  const auto [sy0, sz0] = rabi_analytic(0.0, rp, r);
  EXPECT_NEAR(sy0, 0.0, 1e-12);
  EXPECT_NEAR(sz0, -1.0, 1e-12);
  // steady state of the resonant Bloch equations, ratios are unit free
  const double w = omega, g1 = r.gamma_1, g2 = r.gamma_2;
  const auto [syi, szi] = rabi_analytic(1e-3, rp, r);
  EXPECT_NEAR(syi, w * g1 / (w * w + g1 * g2), 1e-12);
  EXPECT_NEAR(szi, -g1 * g2 / (w * w + g1 * g2), 1e-12);
}

TEST(dynamics, rabi_parameters) {
  const RateSet r = table1_rates();
  const RabiParams p = RabiParams::from(5e6, r);
  EXPECT_DOUBLE_EQ(p.gamma_s, 0.5 * (r.gamma_1 + r.gamma_2));
  EXPECT_NEAR(p.omega_m, std::sqrt(25e12 - 0.25 * std::pow(r.gamma_1 - r.gamma_2, 2)), 1e-6);
  EXPECT_NEAR(1.0 / std::tan(p.theta2), p.gamma_s / p.omega_m, 1e-12);
  EXPECT_NEAR(std::tan(p.theta1), r.gamma_1 / p.omega_m, 0.01 * r.gamma_1 / p.omega_m);
  EXPECT_THROW(RabiParams::from(10e3, r), std::domain_error);
}

TEST(dynamics, theta_sum_approaches_half_pi_from_above) {
  const RateSet r = table1_rates();
  double last = 10.0;
  for (double k : {10.0, 30.0, 100.0, 1000.0}) {
    const RabiParams p = RabiParams::from(k * r.gamma_1, r);
    const double s = (p.theta1 + p.theta2) / kPi;
    EXPECT_GT(s, 0.5);
    EXPECT_LT(s, last);
    last = s;
  }
  EXPECT_NEAR(last, 0.5, 1e-3);
}

TEST(dynamics, steady_state_linear_response) {
  const RateSet r = table1_rates();
  const double omega = 1e3;
  const cd sm = steady_state_sigma_minus(omega, 0.0, r);
  const cd lin(0.0, -omega / (2 * r.gamma_2));
  EXPECT_LT(std::abs(sm - lin), 1e-4 * std::abs(lin));
}

TEST(dynamics, steady_state_matches_long_simulation) {
  const RateSet r = table1_rates().with_gamma_phi(50e3);
  for (double det : {0.0, 150e3}) {
    const double omega = 400e3;
    const ComplexEnvelope drive = constant_drive(omega, 20e-6, 5e-9, r.gamma_r);
    const QubitTrajectory tr = simulate_bloch(drive, det, r, 5e-9);
    EXPECT_LT(std::abs(tr.coherence[tr.size() - 1] - steady_state_sigma_minus(omega, det, r)), 1e-4) << det;
  }
}

TEST(dynamics, steady_state_coherence_peaks_at_geometric_mean_rate) {
  const RateSet r = table1_rates();
  double best = 0.0, best_omega = 0.0;
  for (double w = 10e3; w < 2e6; w += 1e3) {
    const double a = std::abs(steady_state_sigma_minus(w, 0.0, r));
    if (a > best) {
      best = a;
      best_omega = w;
    }
  }
  EXPECT_NEAR(best_omega, std::sqrt(r.gamma_1 * r.gamma_2), 1e3);
}

TEST(dynamics, trajectory_invariants_hold) {
  const RateSet r = table1_rates().with_gamma_phi(30e3);
  const ComplexEnvelope drive = pad_envelope(gaussian_pulse(50e-9, 0.0, 2.3, 0.0, 0.5e-9, r.gamma_r), 1e-6);
  const QubitTrajectory tr = simulate_three_level(drive, 2e6, 251e6, r, 0.1e-9);
  for (Eigen::Index i = 0; i < tr.size(); ++i) {
    EXPECT_NEAR(tr.populations.row(i).sum(), 1.0, 1e-8);
    for (int l = 0; l < 3; ++l) {
      EXPECT_GE(tr.populations(i, l), -1e-12);
      EXPECT_LE(tr.populations(i, l), 1.0 + 1e-12);
    }
    EXPECT_LE(tr.bloch.row(i).norm(), 1.0 + 1e-9);
  }
  const QubitTrajectory two = simulate_bloch(drive, 2e6, r, 0.1e-9);
  for (Eigen::Index i = 0; i < two.size(); ++i) EXPECT_LE(std::abs(two.coherence[i]), 0.5 + 1e-12);
}

TEST(dynamics, huge_anharmonicity_reduces_to_two_levels) {
  const RateSet r = table1_rates();
  const ComplexEnvelope drive = gaussian_pulse(50e-9, 0.0, kPi, 0.0, 0.5e-9, r.gamma_r);
  const double dt = max_stable_dt(30e6, 0.0, r, 1e12);
  const QubitTrajectory three = simulate_three_level(drive, 0.0, 1e12, r, dt);
  const QubitTrajectory two = simulate_bloch(drive, 0.0, r, dt);
  EXPECT_LT((three.bloch - two.bloch).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(dynamics, gaussian_pi_pulse_population) {
  const RateSet r = table1_rates();
  const ComplexEnvelope drive = gaussian_pulse(50e-9, 0.0, kPi, 0.0, 0.5e-9, r.gamma_r);
  const QubitTrajectory two = simulate_bloch(drive, 0.0, r, 0.1e-9);
  EXPECT_GE(two.populations(two.size() - 1, 1), 0.9);
  const QubitTrajectory three = simulate_three_level(drive, 0.0, 251e6, r, 0.1e-9);
  EXPECT_NEAR(three.populations(three.size() - 1, 1), 0.93, 0.02);
}

TEST(dynamics, gaussian_half_pi_coherence_matches_independent_integrator) {
  // frozen value from an adaptive 8th-order Runge-Kutta integration of the
  // same three-level Lindblad equation (relative tolerance 1e-12)
  const RateSet r = table1_rates();
  const ComplexEnvelope drive = gaussian_pulse(50e-9, 0.0, kPi / 2, 0.0, 0.5e-9, r.gamma_r);
  const QubitTrajectory three = simulate_three_level(drive, 0.0, 251e6, r, 0.1e-9);
  EXPECT_NEAR(std::abs(three.coherence[three.size() - 1]), 0.4898, 1e-3);
}

TEST(dynamics, halving_the_step_changes_little) {
  const RateSet r = table1_rates();
  const ComplexEnvelope drive = pad_envelope(gaussian_pulse(50e-9, 0.0, kPi, 0.0, 0.5e-9, r.gamma_r), 200e-9);
  const double dt = max_stable_dt(25e6, 0.0, r, 251e6);
  const QubitTrajectory a = simulate_three_level(drive, 0.0, 251e6, r, dt);
  const QubitTrajectory b = simulate_three_level(drive, 0.0, 251e6, r, dt / 2);
  EXPECT_LT((a.populations - b.populations).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((a.coherence - b.coherence).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(dynamics, oversized_step_is_rejected_with_a_suggestion) {
  const RateSet r = table1_rates();
  const ComplexEnvelope drive = constant_drive(20e6, 100e-9, 1e-9, r.gamma_r);
  try {
    simulate_bloch(drive, 0.0, r, 1e-9);
    FAIL();
  } catch (const StepSizeError& e) {
    EXPECT_GT(e.suggested_dt, 0.0);
    EXPECT_LE(e.suggested_dt, max_stable_dt(20e6, 0.0, r));
  }
}

TEST(dynamics, amplitude_and_rabi_rate_are_inverse) {
  EXPECT_NEAR(rabi_from_amplitude(amplitude_from_rabi(5e6, 270e3), 270e3), 5e6, 1e-6);
  // Omega = 2 sqrt(Gamma_r) a in angular units
  EXPECT_NEAR(2 * M_PI * rabi_from_amplitude(1000.0, 270e3), 2 * std::sqrt(2 * M_PI * 270e3) * 1000.0, 1e-6);
}
