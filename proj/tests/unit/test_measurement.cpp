#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "sps/dynamics.hpp"
#include "sps/measurement.hpp"
#include "sps/pulses.hpp"
#include "sps/tomography.hpp"

using namespace sps;

namespace {

constexpr double kPi = std::numbers::pi;

MeasurementConfig quiet(long shots) {
  MeasurementConfig c;
  c.noise_photons = 0.0;
  c.include_vacuum = false;
  c.n_shots = shots;
  return c;
}

ComplexEnvelope exponential(cd amp, double rate, double dt, Eigen::Index n) {
  Eigen::VectorXcd s(n);
  for (Eigen::Index k = 0; k < n; ++k) s[k] = amp * std::exp(-2 * kPi * rate * dt * static_cast<double>(k));
  return ComplexEnvelope(dt, s);
}

}  // namespace

TEST(measurement, noiseless_shot_matches_closed_form_overlap) {
  MeasurementConfig c = quiet(1);
  c.sample_rate = 1e9;
  const double gf = 376e3, g2 = 188e3, t = 6e-6;
  const cd amp(0.0, -300.0);
  const ComplexEnvelope e = exponential(amp, g2, 1e-9, 6001);
  const ShotSet s = synthesize_shots(e, c, gf);
  const double G = 2 * kPi * gf, k = 0.5 * G + 2 * kPi * g2;
  const cd oracle = amp * std::sqrt(G) * (1 - std::exp(-k * t)) / k / std::sqrt(1 - std::exp(-G * t));
  EXPECT_LT(std::abs(s.signal[0] - oracle), 2e-3 * std::abs(oracle));
  EXPECT_EQ(s.reference[0], cd(0.0, 0.0));
}

TEST(measurement, mode_match_agrees_with_synthesis) {
  MeasurementConfig c = quiet(1);
  const ComplexEnvelope e = exponential(cd(120.0, 50.0), 200e3, 20e-9, 400);
  const ShotSet s = synthesize_shots(e, c, 376e3);
  const cd direct = mode_match(voltage_from_field(e, c.frequency, c.z0), 376e3, c.gain, c.frequency, c.z0);
  EXPECT_LT(std::abs(s.signal[0] - direct), 1e-9 * std::abs(direct));
}

TEST(measurement, matched_filter_collects_all_energy) {
  const double dt = 2e-9;
  const Eigen::VectorXd f = mode_filter(376e3, dt, 3000);
  EXPECT_NEAR(f.squaredNorm() * dt, 1.0, 1e-12);
  const cd c(0.3, -0.4);
  const ComplexEnvelope e(dt, c * f.cast<cd>());
  const cd s = mode_match(voltage_from_field(e, 5.5e9, 50.0), 376e3, 1.0, 5.5e9, 50.0);
  EXPECT_NEAR(std::norm(s), std::norm(c), 1e-12);
  EXPECT_NEAR(std::norm(s), e.energy(), 5e-3 * e.energy());
  EXPECT_THROW(mode_match(ComplexEnvelope::zeros(dt, 100), 376e3, 1.0, 5.5e9, 50.0), std::domain_error);
}

TEST(measurement, gain_cancels_in_photon_units) {
  MeasurementConfig c = quiet(1);
  const ComplexEnvelope e = exponential(cd(80.0, 0.0), 150e3, 20e-9, 400);
  const cd a = synthesize_shots(e, c, 376e3).signal[0];
  c.gain = 1e7;
  EXPECT_LT(std::abs(synthesize_shots(e, c, 376e3).signal[0] - a), 1e-9 * std::abs(a));
}

TEST(measurement, reference_noise_is_total_noise_per_mode) {
  MeasurementConfig c;
  c.n_shots = 20000;
  const ShotSet s = synthesize_shots(ComplexEnvelope::zeros(20e-9, 200), c, 376e3);
  EXPECT_NEAR(s.reference.squaredNorm() / c.n_shots, 2.5, 0.02 * 2.5);
  EXPECT_NEAR(s.signal.squaredNorm() / c.n_shots, 2.5, 0.02 * 2.5);
}

TEST(measurement, pure_noise_has_vanishing_moments) {
  MeasurementConfig c;
  c.n_shots = 40000;
  const ShotSet s = synthesize_shots(ComplexEnvelope::zeros(20e-9, 200), c, 376e3);
  const MomentSet m = extract_field_moments(s, 4, 50, 3);
  for (int n = 0; n <= 4; ++n) {
    for (int k = 0; n + k <= 4; ++k) {
      if (n + k == 0) continue;
      EXPECT_LT(std::abs(m(n, k)), 4 * m.sigma(n, k) + 1e-12) << n << k;
    }
  }
  EXPECT_FALSE(m.insufficient_shots);
}

TEST(measurement, noiseless_coherent_shots_give_exact_moments) {
  MeasurementConfig c = quiet(200);
  const ComplexEnvelope e = exponential(cd(0.0, 500.0), 188e3, 20e-9, 300);
  const ShotSet s = synthesize_shots(e, c, 376e3);
  const cd a = s.signal[0];
  const MomentSet m = extract_field_moments(s, 4, 0);
  EXPECT_LT(std::abs(m(0, 1) - a), 1e-12 * std::abs(a));
  EXPECT_NEAR(m(1, 1).real(), std::norm(a), 1e-9 * std::norm(a));
  EXPECT_NEAR(m(2, 2).real(), std::norm(a) * std::norm(a), 1e-9 * std::pow(std::norm(a), 2));
  EXPECT_LT(std::abs(m(1, 2) - std::norm(a) * a), 1e-9 * std::pow(std::abs(a), 3));
  EXPECT_TRUE(m.insufficient_shots);
}

TEST(measurement, deconvolution_of_displaced_gaussian_noise) {
  // analytic raw moments of alpha + h with <|h|^2> = N
  const cd al(0.7, -0.2);
  const double N = 2.5, x = std::norm(al);
  Eigen::Matrix<cd, 5, 5> raw = Eigen::Matrix<cd, 5, 5>::Zero();
  raw(0, 0) = 1.0;
  raw(0, 1) = al;
  raw(1, 0) = std::conj(al);
  raw(0, 2) = al * al;
  raw(2, 0) = std::conj(al * al);
  raw(1, 1) = x + N;
  raw(1, 2) = x * al + 2.0 * N * al;
  raw(2, 1) = std::conj(raw(1, 2));
  raw(2, 2) = x * x + 4 * x * N + 2 * N * N;
  const Eigen::Matrix<cd, 5, 5> m = deconvolve_moments(raw, N);
  EXPECT_NEAR(m(1, 1).real(), x, 1e-12);
  EXPECT_LT(std::abs(m(1, 2) - x * al), 1e-12);
  EXPECT_NEAR(m(2, 2).real(), x * x, 1e-12);
  EXPECT_LT(std::abs(m(0, 1) - al), 1e-15);
}

TEST(measurement, moments_are_hermitian) {
  MeasurementConfig c;
  c.n_shots = 5000;
  const ShotSet s = synthesize_shots(exponential(cd(200.0, 100.0), 188e3, 20e-9, 300), c, 376e3);
  const MomentSet m = extract_field_moments(s, 4, 10);
  for (int n = 0; n <= 4; ++n) {
    EXPECT_EQ(m(n, n).imag(), 0.0);
    for (int k = 0; n + k <= 4; ++k) EXPECT_EQ(m(k, n), std::conj(m(n, k)));
  }
}

TEST(measurement, results_do_not_depend_on_thread_count) {
  MeasurementConfig c;
  c.n_shots = 30000;
  const ComplexEnvelope e = exponential(cd(200.0, 100.0), 188e3, 20e-9, 300);
  const ShotSet a = synthesize_shots(e, c, 376e3);
  c.threads = 3;
  const ShotSet b = synthesize_shots(e, c, 376e3);
  EXPECT_TRUE(a.signal == b.signal);
  EXPECT_TRUE(a.reference == b.reference);
  const MomentSet ma = extract_field_moments(a, 4, 12, 5, 1);
  const MomentSet mb = extract_field_moments(a, 4, 12, 5, 4);
  EXPECT_TRUE(ma.m == mb.m);
  EXPECT_TRUE(ma.sigma == mb.sigma);
}

TEST(measurement, error_bars_shrink_as_inverse_root_n) {
  MeasurementConfig c;
  c.n_shots = 64000;
  const ShotSet big = synthesize_shots(ComplexEnvelope::zeros(20e-9, 150), c, 376e3);
  ShotSet small;
  small.signal = big.signal.head(4000);
  small.reference = big.reference.head(4000);
  const double ratio = extract_field_moments(small, 2, 50).sigma(1, 1) / extract_field_moments(big, 2, 50).sigma(1, 1);
  EXPECT_NEAR(ratio, 4.0, 1.0);
}

TEST(measurement, excited_qubit_fills_the_matched_mode) {
  const RateSet r = table1_rates();
  Eigen::MatrixXcd q = Eigen::MatrixXcd::Zero(2, 2);
  q(1, 1) = 1.0;
  const DensityMatrix m = emission_mode_state(q, r, r.gamma_1);
  EXPECT_NEAR(m.rho(1, 1).real(), r.gamma_r / r.gamma_1, 1e-12);
  EXPECT_EQ(m.rho(0, 1), cd(0.0, 0.0));
  q.setZero();
  q(0, 0) = 1.0;
  EXPECT_NEAR(emission_mode_state(q, r, r.gamma_1).rho(0, 0).real(), 1.0, 1e-15);
}

TEST(measurement, mode_mean_field_matches_filtered_emission) {
  const RateSet r = table1_rates().with_gamma_phi(20e3);
  Eigen::MatrixXcd q(2, 2);
  q << 0.5, cd(0, 0.5), cd(0, -0.5), 0.5;
  const double gf = 376e3, dt = 1e-9;
  const QubitTrajectory tr = simulate_bloch(ComplexEnvelope::zeros(dt, 30001), 0.0, r, dt, q);
  const ComplexEnvelope e = emitted_field(tr, r.gamma_r);
  const Eigen::VectorXd f = mode_filter(gf, dt, e.size());
  cd oracle = 0.0;
  for (Eigen::Index k = 0; k + 1 < e.size(); ++k) {
    oracle += 0.5 * dt * (f[k] * e.samples[k] + f[k + 1] * e.samples[k + 1]);
  }
  const cd mean = moments_from_rho(emission_mode_state(q, r, gf)).mean_field();
  EXPECT_LT(std::abs(mean - oracle), 1e-3 * std::abs(oracle));
}

TEST(measurement, state_shots_reproduce_a_single_photon) {
  MeasurementConfig c;
  c.n_shots = 200000;
  const MomentSet m = extract_field_moments(synthesize_state_shots(DensityMatrix::fock(1), c, 376e3), 4, 30);
  EXPECT_NEAR(m.photon_number(), 1.0, 4 * m.sigma(1, 1));
  EXPECT_NEAR(m.second_order(), 0.0, 4 * m.sigma(2, 2));
  EXPECT_LT(std::abs(m.mean_field()), 4 * m.sigma(0, 1));
  c.noise_photons = 0.0;
  c.include_vacuum = false;
  EXPECT_THROW(synthesize_state_shots(DensityMatrix::fock(1), c, 376e3), std::invalid_argument);
}

TEST(measurement, config_validation) {
  MeasurementConfig c;
  c.n_shots = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MeasurementConfig{};
  c.gain = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_DOUBLE_EQ(MeasurementConfig{}.total_noise(), 2.5);
}
