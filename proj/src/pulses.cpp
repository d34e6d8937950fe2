#include "sps/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sps/optimize.hpp"

namespace sps {
namespace {

Eigen::Index steps_for(double duration, double dt) {
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * std::max(1.0, ratio)) {
    throw std::invalid_argument("pulse: dt must divide the duration");
  }
  return static_cast<Eigen::Index>(rounded);
}

}  // namespace

ComplexEnvelope gaussian_pulse(double duration, double sigma, double area, double detuning,
                               double dt, double gamma_r) {
  if (!(area > 0.0)) throw std::domain_error("gaussian_pulse: area must be > 0");
  if (!(duration > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("gaussian_pulse: duration and dt must be > 0");
  }
  if (!(gamma_r > 0.0)) throw std::invalid_argument("gaussian_pulse: gamma_r must be > 0");
  if (sigma <= 0.0) sigma = duration / 6.0;
  if (duration < 4.0 * sigma * (1.0 - 1e-12)) {
    throw std::invalid_argument("gaussian_pulse: duration must be >= 4 sigma");
  }
  const Eigen::Index n = steps_for(duration, dt);
  Eigen::VectorXcd s(n + 1);
  const double centre = 0.5 * duration;
  for (Eigen::Index k = 0; k <= n; ++k) {
    const double x = (static_cast<double>(k) * dt - centre) / sigma;
    s[k] = std::exp(-0.5 * x * x);
  }
  // trapezoid of Omega(t) in angular units
  const double scale = 2.0 * std::sqrt(kTwoPi * gamma_r);
  const double integral =
      scale * dt * (s.real().sum() - 0.5 * (s[0].real() + s[n].real()));
  s *= area / integral;
  return ComplexEnvelope(dt, std::move(s), 0.0, detuning);
}

ComplexEnvelope constant_drive(double omega, double duration, double dt, double gamma_r) {
  const Eigen::Index n = steps_for(duration, dt);
  const double a = amplitude_from_rabi(omega, gamma_r);
  return ComplexEnvelope(dt, Eigen::VectorXcd::Constant(n + 1, cd(a, 0.0)));
}

ComplexEnvelope pad_envelope(const ComplexEnvelope& env, double extra) {
  if (extra <= 0.0) return env;
  const auto add = static_cast<Eigen::Index>(std::ceil(extra / env.dt - 1e-9));
  ComplexEnvelope out = env;
  out.samples.conservativeResize(env.size() + add);
  out.samples.tail(add).setZero();
  return out;
}

ComplexEnvelope emitted_field(const QubitTrajectory& traj, double gamma_r) {
  if (traj.size() < 2) throw std::invalid_argument("emitted_field: trajectory too short");
  const double dt = traj.times[1] - traj.times[0];
  const cd factor = cd(0.0, -std::sqrt(kTwoPi * gamma_r));
  return ComplexEnvelope(dt, factor * traj.coherence, traj.times[0]);
}

ComplexEnvelope reflected_field(const ComplexEnvelope& drive, const QubitTrajectory& traj,
                                double gamma_r) {
  ComplexEnvelope emission = emitted_field(traj, gamma_r);
  if (!drive.same_grid(emission)) throw FormatError("reflected_field: grids differ");
  emission.samples += drive.samples;
  emission.carrier_detuning = drive.carrier_detuning;
  return emission;
}

ComplexEnvelope delayed(const ComplexEnvelope& env, double delay) {
  if (delay == 0.0 || env.size() == 0) return env;
  const Eigen::Index n = env.size();
  Eigen::Index m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<cd> x(static_cast<std::size_t>(m), cd{});
  for (Eigen::Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = env.samples[i];
  Eigen::FFT<double> fft;
  std::vector<cd> spec;
  fft.fwd(spec, x);
  const double shift = delay / env.dt;  // in samples
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (2 * k == m) {
      spec[uk] *= std::cos(std::numbers::pi * shift);
      continue;
    }
    const double kk = 2 * k < m ? static_cast<double>(k) : static_cast<double>(k - m);
    spec[uk] *= std::polar(1.0, -kTwoPi * kk * shift / static_cast<double>(m));
  }
  std::vector<cd> y;
  fft.inv(y, spec);
  ComplexEnvelope out = env;
  for (Eigen::Index i = 0; i < n; ++i) out.samples[i] = y[static_cast<std::size_t>(i)];
  return out;
}

ComplexEnvelope apply_cancellation(const ComplexEnvelope& reflected, const ComplexEnvelope& original,
                                   const CancellationSetting& setting) {
  if (!reflected.same_grid(original)) throw FormatError("apply_cancellation: grids differ");
  ComplexEnvelope out = reflected;
  out.samples += std::polar(setting.amp_scale, setting.phase) *
                 delayed(original, setting.delay).samples;
  return out;
}

CancellationCalibration calibrate_cancellation(const ComplexEnvelope& reflected,
                                               const ComplexEnvelope& original,
                                               const CancellationSetting& init) {
  if (!reflected.same_grid(original)) throw FormatError("calibrate_cancellation: grids differ");
  const double e_in = original.energy();
  if (!(e_in > 0.0)) throw std::domain_error("calibrate_cancellation: zero input energy");
  // delay is searched in units of dt to keep the simplex well scaled
  auto objective = [&](const Eigen::VectorXd& p) {
    const CancellationSetting s{p[0], p[1], p[2] * original.dt};
    return apply_cancellation(reflected, original, s).energy() / e_in;
  };
  Eigen::VectorXd x0(3);
  x0 << init.amp_scale, init.phase, init.delay / original.dt;
  SimplexOptions opt;
  opt.initial_step = Eigen::Vector3d(0.05, 0.05, 0.5);
  opt.max_iterations = 500;
  opt.rel_tol = 1e-10;
  opt.abs_tol = 1e-24;
  const SimplexResult r = nelder_mead(objective, x0, opt);
  CancellationCalibration out;
  out.setting = {r.x[0], r.x[1], r.x[2] * original.dt};
  out.converged = r.converged;
  out.iterations = r.iterations;
  out.residual_fraction = r.value;
  return out;
}

double suppression_db(double residual_energy, double input_energy) {
  if (!(input_energy > 0.0)) throw std::domain_error("suppression_db: input energy must be > 0");
  return 10.0 * std::log10(residual_energy / input_energy);
}

ComplexEnvelope voltage_from_field(const ComplexEnvelope& field, double frequency, double z0) {
  const double k = std::sqrt(2.0 * z0 * kHbar * kTwoPi * frequency);
  ComplexEnvelope v = field;
  v.samples *= k;
  return v;
}

double photon_number(const ComplexEnvelope& v, cd v_noise, double frequency, double z0, double t0,
                     double t1) {
  if (!(t1 > t0)) throw std::domain_error("photon_number: empty window");
  if (v.size() < 2 || t0 < v.t0 - 1e-9 * v.dt || t1 > v.t_end() + 1e-9 * v.dt) {
    throw std::domain_error("photon_number: window outside the record");
  }
  const double noise = std::norm(v_noise);
  auto power = [&](double t) { return std::norm(v.at(std::clamp(t, v.t0, v.t_end()))) - noise; };
  auto first = static_cast<Eigen::Index>(std::ceil((t0 - v.t0) / v.dt - 1e-9));
  double prev_t = t0;
  double prev_p = power(t0);
  double total = 0.0;
  for (Eigen::Index i = first; i < v.size() && v.time(i) < t1 - 1e-9 * v.dt; ++i) {
    const double t = v.time(i);
    if (t <= t0 + 1e-9 * v.dt) continue;
    const double p = std::norm(v.samples[i]) - noise;
    total += 0.5 * (p + prev_p) * (t - prev_t);
    prev_t = t;
    prev_p = p;
  }
  total += 0.5 * (power(t1) + prev_p) * (t1 - prev_t);
  return total / (2.0 * z0 * kHbar * kTwoPi * frequency);
}

double leakage_estimate(double n_leak_meas, double n_q_meas, const RateSet& rates) {
  if (!(n_q_meas > 0.0)) throw std::domain_error("leakage_estimate: n_q_meas must be > 0");
  if (!(rates.gamma_2 > 0.0)) throw std::domain_error("leakage_estimate: gamma_2 must be > 0");
  return n_leak_meas / n_q_meas * rates.gamma_r / (8.0 * rates.gamma_2);
}

}  // namespace sps
