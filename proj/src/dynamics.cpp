#include "sps/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace sps {
namespace {

template <int D>
using Mat = Eigen::Matrix<cd, D, D>;

template <int D>
struct Lindblad {
  Mat<D> lower;          // truncated annihilation operator
  Mat<D> heff_static;    // energies minus i/2 sum L^dag L
  Mat<D> collapse[2];
  double omega_scale;    // angular Rabi per unit field amplitude

  Mat<D> derivative(const Mat<D>& rho, cd field) const {
    const cd half = 0.5 * omega_scale * field;
    Mat<D> heff = heff_static;
    heff.noalias() += half * lower.adjoint();
    heff.noalias() += std::conj(half) * lower;
    const cd mi(0.0, -1.0);
    Mat<D> d = mi * (heff * rho) - mi * (rho * heff.adjoint());
    for (const auto& l : collapse) d.noalias() += l * rho * l.adjoint();
    return d;
  }
};

template <int D>
Lindblad<D> build(double detuning, double anharm, const RateSet& rates) {
  const double g1 = kTwoPi * rates.gamma_1;
  double gphi = rates.gamma_2 - 0.5 * rates.gamma_1;
  if (gphi < -1e-9 * std::max(rates.gamma_2, 1.0)) {
    throw std::invalid_argument("simulate: gamma_2 < gamma_1 / 2 is unphysical");
  }
  gphi = kTwoPi * std::max(gphi, 0.0);

  Lindblad<D> sys;
  sys.lower.setZero();
  Mat<D> number = Mat<D>::Zero();
  for (int n = 1; n < D; ++n) {
    sys.lower(n - 1, n) = std::sqrt(static_cast<double>(n));
    number(n, n) = n;
  }
  Mat<D> h = Mat<D>::Zero();
  const double delta = kTwoPi * detuning;
  h(1, 1) = delta;
  if constexpr (D > 2) h(2, 2) = 2.0 * delta - kTwoPi * anharm;

  sys.collapse[0] = std::sqrt(g1) * sys.lower;
  sys.collapse[1] = std::sqrt(2.0 * gphi) * number;
  sys.heff_static = h;
  for (const auto& l : sys.collapse) sys.heff_static -= cd(0.0, 0.5) * (l.adjoint() * l);
  sys.omega_scale = 2.0 * std::sqrt(kTwoPi * rates.gamma_r);
  return sys;
}

double peak_rabi(const ComplexEnvelope& drive, double gamma_r) {
  const double amax = drive.size() ? drive.samples.cwiseAbs().maxCoeff() : 0.0;
  return rabi_from_amplitude(amax, gamma_r);
}

template <int D>
QubitTrajectory run(const ComplexEnvelope& drive, double detuning, double anharm,
                    const RateSet& rates, double dt, const std::optional<Eigen::MatrixXcd>& initial) {
  drive.validate();
  if (drive.size() < 1) throw std::invalid_argument("simulate: empty drive");
  const double eff_detuning = detuning - drive.carrier_detuning;
  const double limit =
      max_stable_dt(peak_rabi(drive, rates.gamma_r), eff_detuning, rates, D > 2 ? anharm : 0.0);
  if (dt <= 0.0) dt = std::min(limit, drive.dt);
  if (dt > limit * (1.0 + 1e-12)) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "simulate: dt = %.3g s exceeds the stable step; use dt <= %.3g s",
                  dt, limit);
    throw StepSizeError(msg, limit);
  }
  const auto substeps = static_cast<long>(std::ceil(drive.dt / dt - 1e-9));
  const double h = drive.dt / static_cast<double>(substeps);
  const auto sys = build<D>(eff_detuning, anharm, rates);

  Mat<D> rho = Mat<D>::Zero();
  if (initial) {
    if (initial->rows() > D || initial->cols() != initial->rows()) {
      throw std::invalid_argument("simulate: initial state has the wrong dimension");
    }
    const auto n = initial->rows();
    rho.topLeftCorner(n, n) = *initial;
  } else {
    rho(0, 0) = 1.0;
  }

  const Eigen::Index n = drive.size();
  QubitTrajectory tr;
  tr.levels = D;
  tr.times.resize(n);
  tr.bloch.resize(n, 3);
  tr.populations.resize(n, D);
  tr.coherence.resize(n);
  auto record = [&](Eigen::Index i) {
    tr.times[i] = drive.time(i);
    const cd s = rho(1, 0);
    tr.coherence[i] = s;
    tr.bloch(i, 0) = 2.0 * s.real();
    tr.bloch(i, 1) = -2.0 * s.imag();
    tr.bloch(i, 2) = rho(1, 1).real() - rho(0, 0).real();
    for (int k = 0; k < D; ++k) tr.populations(i, k) = rho(k, k).real();
  };
  record(0);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const cd a0 = drive.samples[i];
    const cd a1 = drive.samples[i + 1];
    for (long s = 0; s < substeps; ++s) {
      const double w0 = static_cast<double>(s) / static_cast<double>(substeps);
      const double w1 = static_cast<double>(s + 1) / static_cast<double>(substeps);
      const cd f0 = (1.0 - w0) * a0 + w0 * a1;
      const cd f1 = (1.0 - w1) * a0 + w1 * a1;
      const cd fm = 0.5 * (f0 + f1);
      const Mat<D> k1 = sys.derivative(rho, f0);
      const Mat<D> k2 = sys.derivative(rho + 0.5 * h * k1, fm);
      const Mat<D> k3 = sys.derivative(rho + 0.5 * h * k2, fm);
      const Mat<D> k4 = sys.derivative(rho + h * k3, f1);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    record(i + 1);
  }
  tr.final_state = rho;
  return tr;
}

}  // namespace

RabiParams RabiParams::from(double omega, const RateSet& rates) {
  const double g1 = rates.gamma_1;
  const double g2 = rates.gamma_2;
  const double disc = omega * omega - 0.25 * (g1 - g2) * (g1 - g2);
  if (!(disc > 0.0)) throw std::domain_error("RabiParams: overdamped drive, omega_m imaginary");
  RabiParams p;
  p.omega = omega;
  p.gamma_s = 0.5 * (g1 + g2);
  p.omega_m = std::sqrt(disc);
  p.b1 = p.omega_m - (g1 * g1 - g2 * g2) / (4.0 * p.omega_m);
  p.b2 = p.gamma_s / p.omega_m;
  p.theta1 = std::atan2(g1, p.b1);
  p.theta2 = std::atan2(1.0, p.b2);
  return p;
}

double rabi_from_amplitude(double a, double gamma_r) {
  return 2.0 * std::sqrt(kTwoPi * gamma_r) * a / kTwoPi;
}

double amplitude_from_rabi(double omega, double gamma_r) {
  if (!(gamma_r > 0.0)) throw std::domain_error("amplitude_from_rabi: gamma_r must be > 0");
  return kTwoPi * omega / (2.0 * std::sqrt(kTwoPi * gamma_r));
}

double max_stable_dt(double omega_peak, double detuning, const RateSet& rates, double anharm) {
  const double fastest =
      std::max({std::abs(omega_peak), rates.gamma_1, rates.gamma_2, std::abs(detuning)});
  double limit = fastest > 0.0 ? 1.0 / (50.0 * kTwoPi * fastest) : 1.0;
  if (anharm > 0.0) {
    limit = std::min(limit, 1.0 / (kTwoPi * std::abs(2.0 * detuning - anharm)));
  }
  return limit;
}

QubitTrajectory simulate_bloch(const ComplexEnvelope& drive, double detuning, const RateSet& rates,
                               double dt, const std::optional<Eigen::MatrixXcd>& initial) {
  return run<2>(drive, detuning, 0.0, rates, dt, initial);
}

QubitTrajectory simulate_three_level(const ComplexEnvelope& drive, double detuning, double anharm,
                                     const RateSet& rates, double dt,
                                     const std::optional<Eigen::MatrixXcd>& initial) {
  if (!(anharm > 0.0)) throw std::invalid_argument("simulate_three_level: anharm must be > 0");
  return run<3>(drive, detuning, anharm, rates, dt, initial);
}

std::pair<double, double> rabi_analytic(double tau, const RabiParams& rabi, const RateSet& rates) {
  const double w = kTwoPi * rabi.omega;
  const double g1 = kTwoPi * rates.gamma_1;
  const double g2 = kTwoPi * rates.gamma_2;
  const double gs = kTwoPi * rabi.gamma_s;
  const double wm = kTwoPi * rabi.omega_m;
  const double b1 = kTwoPi * rabi.b1;
  const double denom = w * w + g1 * g2;
  const double decay = std::exp(-gs * tau);
  const double sy =
      w / denom * (g1 + decay * std::sqrt(g1 * g1 + b1 * b1) * std::sin(wm * tau - rabi.theta1));
  const double sz = (-g1 * g2 - w * w * decay * std::sqrt(1.0 + rabi.b2 * rabi.b2) *
                                    std::sin(wm * tau + rabi.theta2)) /
                    denom;
  return {sy, sz};
}

std::complex<double> steady_state_sigma_minus(double omega, double detuning, const RateSet& rates) {
  const double w = kTwoPi * omega;
  const double d = kTwoPi * detuning;
  const double g1 = kTwoPi * rates.gamma_1;
  const double g2 = kTwoPi * rates.gamma_2;
  if (g1 <= 0.0 || g2 <= 0.0) {
    throw std::domain_error("steady_state_sigma_minus: gamma_1 and gamma_2 must be > 0");
  }
  return -(0.5 * w) * cd(d, g2) / (d * d + g2 * g2 + w * w * g2 / g1);
}

void write_trajectory_csv(const std::string& path, const QubitTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# sps trajectory v1; levels=" << traj.levels << "\n";
  os << "time,sx,sy,sz,re_sm,im_sm\n";
  char buf[200];
  for (Eigen::Index i = 0; i < traj.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e,%.12e,%.12e,%.12e\n", traj.times[i],
                  traj.bloch(i, 0), traj.bloch(i, 1), traj.bloch(i, 2), traj.coherence[i].real(),
                  traj.coherence[i].imag());
    os << buf;
  }
}

}  // namespace sps
