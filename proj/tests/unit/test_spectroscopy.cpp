#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "sps/spectroscopy.hpp"

using namespace sps;

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr double kF01 = 5.51e9;

Eigen::VectorXd probe(int n = 201, double span = 6e6) {
  return Eigen::VectorXd::LinSpaced(n, kF01 - span / 2, kF01 + span / 2);
}

}  // namespace

TEST(spectroscopy, resonant_reflection_of_table_rates) {
  EXPECT_NEAR(reflection_model(0.0, 270e3, 188e3, 0.0).real(), 1.0 - 270.0 / 188.0, 1e-12);
  EXPECT_NEAR(reflection_model(0.0, 270e3, 188e3, 0.0).real(), -0.436, 1e-3);
  EXPECT_LT(std::abs(reflection_model(1e9, 270e3, 188e3, 0.3) - 1.0), 1e-3);
}

TEST(spectroscopy, mismatch_phase_makes_the_line_asymmetric) {
  const double d = 150e3;
  EXPECT_NEAR(std::abs(reflection_model(d, 270e3, 188e3, 0.0)), std::abs(reflection_model(-d, 270e3, 188e3, 0.0)),
              1e-12);
  EXPECT_GT(std::abs(std::abs(reflection_model(d, 270e3, 188e3, 0.2)) -
                     std::abs(reflection_model(-d, 270e3, 188e3, 0.2))),
            0.05);
}

TEST(spectroscopy, fit_recovers_parameters) {
  const ReflectionTrace tr = synthetic_trace(probe(), kF01, 270e3, 188e3, 0.12, 0.01, 4);
  const ReflectionFit f = fit_reflection(tr);
  ASSERT_TRUE(f.converged);
  EXPECT_FALSE(f.degenerate);
  EXPECT_FALSE(f.narrow_span);
  EXPECT_NEAR(f.f01, kF01, 3 * f.errors[0]);
  EXPECT_NEAR(f.gamma_r, 270e3, 3 * f.errors[1]);
  EXPECT_NEAR(f.gamma_2, 188e3, 3 * f.errors[2]);
  EXPECT_NEAR(f.phi, 0.12, 3 * f.errors[3]);
  EXPECT_LT(f.errors[1], 0.02 * 270e3);
}

TEST(spectroscopy, fit_resolves_the_sign_ambiguity) {
  const ReflectionTrace tr = synthetic_trace(probe(), kF01, 270e3, 188e3, -2.9, 0.005, 5);
  const ReflectionFit f = fit_reflection(tr);
  EXPECT_GT(f.gamma_r, 0.0);
  EXPECT_NEAR(std::remainder(f.phi + 2.9, 2 * kPi), 0.0, 5 * f.errors[3]);
}

TEST(spectroscopy, fit_is_unbiased) {
  const int reps = 100;
  double bias = 0.0, sigma = 0.0;
  for (int i = 0; i < reps; ++i) {
    const ReflectionFit f = fit_reflection(synthetic_trace(probe(), kF01, 270e3, 188e3, 0.0, 0.01, 1000 + i));
    bias += f.gamma_r - 270e3;
    sigma += f.errors[1];
  }
  EXPECT_LT(std::abs(bias / reps), 0.2 * sigma / reps);
}

TEST(spectroscopy, flat_trace_is_degenerate) {
  ReflectionTrace tr;
  tr.probe_freqs = probe();
  tr.r_values = Eigen::VectorXcd::Ones(tr.probe_freqs.size());
  EXPECT_TRUE(fit_reflection(tr).degenerate);
}

TEST(spectroscopy, narrow_span_is_flagged) {
  const ReflectionTrace tr = synthetic_trace(probe(201, 1.5e6), kF01, 270e3, 188e3, 0.0, 0.001, 6);
  EXPECT_TRUE(fit_reflection(tr).narrow_span);
}

TEST(spectroscopy, short_traces_are_rejected) {
  const ReflectionTrace tr = synthetic_trace(probe(49), kF01, 270e3, 188e3, 0.0, 0.01, 1);
  EXPECT_THROW(fit_reflection(tr), std::invalid_argument);
  ReflectionTrace bad = synthetic_trace(probe(60), kF01, 270e3, 188e3, 0.0, 0.01, 1);
  bad.probe_freqs[5] = bad.probe_freqs[4];
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(spectroscopy, phase_model_limits) {
  MismatchParams m{0.0, 1.0, 5e-9};
  EXPECT_EQ(phase_model(5.3e9, m), 0.0);
  m.r1 = 1e-4;
  m.t1beta = 0.9;
  for (double f : {4.9e9, 5.2e9, 5.45e9}) {
    const double series = m.r1 / m.t1beta * std::sin(4 * kPi * f * m.tau_delay);
    EXPECT_NEAR(phase_model(f, m), series, 1e-7);
  }
}

TEST(spectroscopy, compensation_inverts_the_distortion) {
  for (double d : {-300e3, 0.0, 120e3}) {
    const cd raw = reflection_model(d, 270e3, 188e3, 0.17);
    EXPECT_LT(std::abs(compensate_mismatch(raw, 0.17) - reflection_model(d, 270e3, 188e3, 0.0)), 1e-14);
  }
}

TEST(spectroscopy, compensated_trace_fits_with_zero_phase) {
  const ReflectionTrace raw = synthetic_trace(probe(), kF01, 270e3, 188e3, 0.15, 0.01, 7);
  ReflectionFitOptions o;
  o.fix_phase = true;
  const ReflectionFit f = fit_reflection(compensate_trace(raw, 0.15), o);
  EXPECT_EQ(f.phi, 0.0);
  EXPECT_NEAR(f.gamma_r, 270e3, 3 * f.errors[1]);
}

TEST(spectroscopy, phase_curve_round_trip) {
  const MismatchParams truth{0.14, (1 - 0.14 * 0.14) * 0.97 * 0.97, 5e-9};
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(31, 4.9e9, 5.5e9);
  Eigen::VectorXd phi(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) phi[i] = phase_model(f[i], truth);
  const PhaseCurveFit fit = fit_phase_curve(f, phi, 0.97);
  ASSERT_TRUE(fit.converged);
  EXPECT_FALSE(fit.underdetermined);
  EXPECT_NEAR(fit.params.r1, truth.r1, 1e-8);
  EXPECT_NEAR(fit.params.tau_delay, truth.tau_delay, 1e-16);
  EXPECT_NEAR(fit.ratio, truth.r1 / truth.t1beta, 1e-8);
}

TEST(spectroscopy, zero_phases_mean_no_mismatch) {
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(31, 4.9e9, 5.5e9);
  const PhaseCurveFit fit = fit_phase_curve(f, Eigen::VectorXd::Zero(31), 0.97);
  EXPECT_NEAR(fit.params.r1, 0.0, 1e-9);
}

TEST(spectroscopy, trace_csv_round_trip) {
  const ReflectionTrace tr = synthetic_trace(probe(60), kF01, 270e3, 188e3, 0.1, 0.01, 3);
  const auto path = (std::filesystem::temp_directory_path() / "sps_trace_roundtrip.csv").string();
  write_trace_csv(path, tr);
  const ReflectionTrace back = read_trace_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), tr.size());
  EXPECT_LT((back.probe_freqs - tr.probe_freqs).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((back.r_values - tr.r_values).cwiseAbs().maxCoeff(), 1e-9);
}
