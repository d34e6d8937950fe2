#include "sps/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "sps/optimize.hpp"

namespace sps {
namespace {

std::mt19937_64 engine(std::uint64_t seed, std::uint32_t a, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kTlsTag = 0x7e15;
constexpr std::uint32_t kJumpTag = 0x1a3b;
constexpr std::uint32_t kDriftTag = 0xd71f;
constexpr std::uint32_t kRecordTag = 0x5107;
constexpr double kRateUnit = 1e5;  // fit parameters in units of 100 kHz
using cd = std::complex<double>;

}  // namespace

void TelegraphTLS::validate() const {
  if (!(gamma_switch >= 0.0)) throw std::invalid_argument("TelegraphTLS.gamma_switch: must be >= 0");
  if (state != 0 && state != 1) throw std::invalid_argument("TelegraphTLS.state: must be 0 or 1");
  if (chi != 0.0 && g != 0.0 && delta_tls != 0.0) {
    const double g2 = g * g;
    if (std::abs(chi * delta_tls - g2) > 1e-6 * g2) {
      throw std::invalid_argument("TelegraphTLS: chi * delta_tls must equal g^2");
    }
  }
}

std::vector<double> telegraph_switch_times(double duration, const TelegraphTLS& tls,
                                           std::uint64_t seed) {
  tls.validate();
  std::vector<double> out;
  if (tls.gamma_switch <= 0.0) return out;
  auto rng = engine(seed, 0, kTlsTag);
  std::exponential_distribution<double> wait(tls.gamma_switch);
  for (double t = wait(rng); t < duration; t += wait(rng)) out.push_back(t);
  return out;
}

int telegraph_state_at(double t, const std::vector<double>& switches, int initial_state) {
  const auto flips = std::upper_bound(switches.begin(), switches.end(), t) - switches.begin();
  return (initial_state + static_cast<int>(flips % 2)) % 2;
}

std::vector<std::uint8_t> simulate_telegraph(double duration, const TelegraphTLS& tls, double dt,
                                             std::uint64_t seed) {
  if (!(dt > 0.0) || !(duration > 0.0)) throw std::invalid_argument("simulate_telegraph: dt, duration > 0");
  const std::vector<double> sw = telegraph_switch_times(duration, tls, seed);
  const auto n = static_cast<std::size_t>(std::floor(duration / dt));
  std::vector<std::uint8_t> out(n);
  std::size_t next = 0;
  int state = tls.state;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (next < sw.size() && sw[next] <= t) {
      state ^= 1;
      ++next;
    }
    out[k] = static_cast<std::uint8_t>(state);
  }
  return out;
}

TlsRelaxation tls_relaxation_contribution(const TelegraphTLS& tls) {
  TlsRelaxation r;
  if (tls.g == 0.0) return r;
  if (tls.delta_tls == 0.0) throw std::domain_error("tls_relaxation_contribution: delta_tls must be non-zero");
  const double ratio = tls.g / tls.delta_tls;
  r.rate = ratio * ratio * tls.gamma_switch;
  r.regime_warning = std::abs(tls.g) > std::abs(tls.delta_tls) / 5.0;
  return r;
}

StabilityConfig StabilityConfig::paper() {
  StabilityConfig c;
  StabilityTls a;
  a.tls.gamma_switch = 34.7e-6;
  a.tls.chi = 40e3;
  a.flux_point = 0;
  a.dephasing_cap = 125e3;
  StabilityTls b;
  b.tls.gamma_switch = 127.9e-6;
  b.tls.chi = 40e3;
  b.flux_point = 1;
  b.dephasing_cap = 180e3;
  c.tls = {a, b};
  return c;
}

void StabilityConfig::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("StabilityConfig.duration: must be > 0");
  if (slots < 2 || slots % 2 != 0) throw std::invalid_argument("StabilityConfig.slots: must be even and >= 2");
  if (record_points < 10 || !(record_dt > 0.0)) {
    throw std::invalid_argument("StabilityConfig: record needs >= 10 points and dt > 0");
  }
  if (power_noise < 0.0 || quadrature_noise < 0.0) throw std::invalid_argument("StabilityConfig: noise must be >= 0");
  if (jumps.rate < 0.0 || jumps.sigma < 0.0) throw std::invalid_argument("StabilityConfig.jumps: must be >= 0");
  for (const auto& t : tls) {
    t.tls.validate();
    if (t.flux_point != 0 && t.flux_point != 1) throw std::invalid_argument("StabilityTls.flux_point: 0 or 1");
    if (t.dephasing_cap < 0.0) throw std::invalid_argument("StabilityTls.dephasing_cap: must be >= 0");
  }
}

StabilityTimeline generate_stability_dataset(const StabilityConfig& config,
                                             const DeviceParams& params, std::uint64_t seed) {
  config.validate();
  params.validate();
  DeviceParams p = params;
  p.phi0_convention = FluxUnit::kFluxQuantum;
  const GammaNModel gamma_n = linear_gamma_n_model(p, config.gamma_n_cutoff);
  const double t_phase =
      self_consistent_dephasing_time(std::span<const double>(config.flux_points), p).t_phase;

  const int ns = config.slots;
  const double slot_len = config.duration / ns;
  StabilityTimeline tl;
  for (int s = 0; s < ns; ++s) {
    tl.wall_times.push_back((s + 0.5) * slot_len);
    tl.flux_point_id.push_back(s % 2);
  }

  // Fluctuators, one stream each.
  std::vector<std::vector<double>> switches;
  for (std::size_t i = 0; i < config.tls.size(); ++i) {
    const auto& t = config.tls[i];
    switches.push_back(telegraph_switch_times(config.duration, t.tls, seed ^ (0x9e3779b97f4a7c15ULL * (i + 1))));
    std::vector<std::uint8_t> st(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) st[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(
        telegraph_state_at(tl.wall_times[static_cast<std::size_t>(s)], switches.back(), t.tls.state));
    tl.tls_states.push_back(std::move(st));
  }

  // Flux jumps: Poisson arrivals, normal steps.
  std::vector<std::pair<double, double>> jumps;
  {
    auto rng = engine(seed, 0, kJumpTag);
    if (config.jumps.rate > 0.0) {
      std::exponential_distribution<double> wait(config.jumps.rate);
      std::normal_distribution<double> step(0.0, config.jumps.sigma);
      for (double t = wait(rng); t < config.duration; t += wait(rng)) jumps.emplace_back(t, step(rng));
    }
  }
  tl.jumps = static_cast<int>(jumps.size());

  // 1/f flux drift by spectral synthesis on the slot grid.
  std::vector<double> drift(static_cast<std::size_t>(ns), 0.0);
  if (config.flux_drift && p.flux_noise_sqrt_A > 0.0) {
    auto rng = engine(seed, 0, kDriftTag);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const double a_phi = p.flux_noise_sqrt_A * p.flux_noise_sqrt_A;
    for (int k = 1; k <= ns / 2; ++k) {
      const double fk = k / config.duration;
      const double amp = std::sqrt(2.0 * a_phi / fk / config.duration);
      const double th = phase(rng);
      for (int s = 0; s < ns; ++s) {
        drift[static_cast<std::size_t>(s)] += amp * std::cos(kTwoPi * fk * tl.wall_times[static_cast<std::size_t>(s)] + th);
      }
    }
  }

  for (int s = 0; s < ns; ++s) {
    const auto us = static_cast<std::size_t>(s);
    const int fp = tl.flux_point_id[us];
    const double phi0 = config.flux_points[static_cast<std::size_t>(fp)];
    double dphi = drift[us];
    for (const auto& [tj, step] : jumps)
      if (tj <= tl.wall_times[us]) dphi += step;

    const RateSet base = rates_at_flux(phi0 + dphi, t_phase, p, gamma_n);
    double gamma_1 = base.gamma_1;
    double gamma_phi = base.gamma_phi;
    double shift = flux_to_frequency(phi0 + dphi, p) - flux_to_frequency(phi0, p);
    for (std::size_t i = 0; i < config.tls.size(); ++i) {
      const auto& t = config.tls[i];
      if (t.flux_point != fp) continue;
      gamma_1 += tls_relaxation_contribution(t.tls).rate;
      if (tl.tls_states[i][us] == 0) continue;
      shift += t.tls.chi;
      const double chi_w = kTwoPi * t.tls.chi;
      const double telegraph = t.tls.gamma_switch > 0.0
                                   ? 2.0 * chi_w * chi_w / t.tls.gamma_switch / kTwoPi
                                   : t.dephasing_cap;
      gamma_phi += std::min(telegraph, t.dephasing_cap);
    }
    SlotTruth tr;
    tr.gamma_1 = gamma_1;
    tr.gamma_phi = gamma_phi;
    tr.gamma_2 = 0.5 * gamma_1 + gamma_phi;
    tr.freq_offset = shift;
    tr.eta_p = gamma_phi / tr.gamma_2;
    tr.flux_offset = dphi;
    tl.truth.push_back(tr);

    auto rng = engine(seed, static_cast<std::uint32_t>(s), kRecordTag);
    std::normal_distribution<double> normal(0.0, 1.0);
    DecayRecord rec;
    const int np = config.record_points;
    rec.times.resize(np);
    rec.power.resize(np);
    rec.quadrature.resize(np);
    for (int k = 0; k < np; ++k) {
      const double t = k * config.record_dt;
      rec.times[k] = t;
      rec.power[k] = std::exp(-kTwoPi * gamma_1 * t) + config.power_noise * normal(rng);
      const cd q = std::exp(-kTwoPi * tr.gamma_2 * t) * std::polar(1.0, -kTwoPi * shift * t);
      rec.quadrature[k] = q + config.quadrature_noise * cd(normal(rng), normal(rng));
    }
    tl.records.push_back(std::move(rec));
  }
  return tl;
}

FrequencyEstimate frequency_from_phase(const Eigen::VectorXd& times,
                                       const Eigen::VectorXcd& quadrature) {
  if (times.size() != quadrature.size() || times.size() < 3) {
    throw std::invalid_argument("frequency_from_phase: need >= 3 matching samples");
  }
  FrequencyEstimate out;
  const double q0 = std::abs(quadrature[0]);
  Eigen::Index n = 0;
  while (n < quadrature.size() && std::abs(quadrature[n]) >= 0.1 * q0) ++n;
  if (n < 3) {
    out.ambiguous = true;
    return out;
  }
  Eigen::VectorXd ph(n), w(n);
  double prev = std::arg(quadrature[0]);
  double max_step = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double a = std::arg(quadrature[i]);
    if (i > 0) {
      const double d = std::remainder(a - std::remainder(prev, kTwoPi), kTwoPi);
      a = prev + d;
      max_step = std::max(max_step, std::abs(d));
    }
    ph[i] = a;
    prev = a;
    w[i] = std::norm(quadrature[i]);
  }
  const Eigen::VectorXd t = times.head(n);
  const double sw = w.sum();
  const double tm = w.dot(t) / sw;
  const double pm = w.dot(ph) / sw;
  const Eigen::ArrayXd dt = t.array() - tm;
  const double sxx = (w.array() * dt * dt).sum();
  const double slope = (w.array() * dt * (ph.array() - pm)).sum() / sxx;
  const Eigen::ArrayXd res = ph.array() - pm - slope * dt;
  const double s2 = (w.array() * res * res).sum() / std::max<Eigen::Index>(1, n - 2);
  out.offset = -slope / kTwoPi;
  out.error = std::sqrt(s2 / sxx) / kTwoPi;
  // a phase step near pi per sample cannot be unwrapped unambiguously
  out.ambiguous = max_step > 0.5 * std::numbers::pi;
  return out;
}

DecayEstimate estimate_rates_from_decay(const Eigen::VectorXd& times, const Eigen::VectorXd& power,
                                        const Eigen::VectorXcd& quadrature) {
  const Eigen::Index n = times.size();
  if (power.size() != n || quadrature.size() != n || n < 5) {
    throw std::invalid_argument("estimate_rates_from_decay: need >= 5 matching samples");
  }
  DecayEstimate out;

  // Power: log-linear start on the points well above the noise.
  double k0 = 0.0, a0 = power[0];
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (Eigen::Index i = 0; i < n && power[i] > 0.1 * std::max(power[0], 1e-300); ++i, ++m) {
      const double y = std::log(power[i]);
      sx += times[i];
      sy += y;
      sxx += times[i] * times[i];
      sxy += times[i] * y;
    }
    if (m >= 2) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      k0 = -slope / kTwoPi;
      a0 = std::exp((sy - slope * sx) / m);
    }
  }
  if (!(k0 > 0.0)) return out;
  const ResidualFn pres = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r = (x[0] * (-kTwoPi * x[1] * kRateUnit * times.array()).exp()).matrix() - power;
  };
  const LeastSquaresResult pf = least_squares(pres, Eigen::Vector2d(a0, k0 / kRateUnit), static_cast<int>(n));

  // Quadrature: complex amplitude, gamma_2 and frequency offset.
  const FrequencyEstimate fe = frequency_from_phase(times, quadrature);
  double g0 = 0.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    const double q0 = std::abs(quadrature[0]);
    for (Eigen::Index i = 0; i < n && std::abs(quadrature[i]) > 0.1 * q0; ++i, ++m) {
      const double y = std::log(std::abs(quadrature[i]));
      sx += times[i];
      sy += y;
      sxx += times[i] * times[i];
      sxy += times[i] * y;
    }
    if (m >= 2) g0 = -(m * sxy - sx * sy) / (m * sxx - sx * sx) / kTwoPi;
  }
  if (!(g0 > 0.0)) return out;
  const ResidualFn qres = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r.resize(2 * n);
    const cd c(x[0], x[1]);
    const cd rate(kTwoPi * x[2] * kRateUnit, kTwoPi * x[3] * kRateUnit);
    for (Eigen::Index i = 0; i < n; ++i) {
      const cd d = c * std::exp(-rate * times[i]) - quadrature[i];
      r[2 * i] = d.real();
      r[2 * i + 1] = d.imag();
    }
  };
  Eigen::Vector4d q0(quadrature[0].real(), quadrature[0].imag(), g0 / kRateUnit, fe.offset / kRateUnit);
  const LeastSquaresResult qf = least_squares(qres, q0, static_cast<int>(2 * n));

  out.gamma_1 = pf.x[1] * kRateUnit;
  out.gamma_1_err = pf.errors()[1] * kRateUnit;
  out.gamma_2 = qf.x[2] * kRateUnit;
  out.gamma_2_err = qf.errors()[2] * kRateUnit;
  out.freq_offset = qf.x[3] * kRateUnit;
  out.freq_offset_err = qf.errors()[3] * kRateUnit;
  out.gamma_phi = out.gamma_2 - 0.5 * out.gamma_1;
  out.gamma_phi_err = std::hypot(out.gamma_2_err, 0.5 * out.gamma_1_err);
  if (out.gamma_2 > 0.0) {
    out.eta_p = out.gamma_phi / out.gamma_2;
    out.eta_p_err = std::hypot(out.gamma_1_err / (2.0 * out.gamma_2),
                               out.gamma_1 * out.gamma_2_err / (2.0 * out.gamma_2 * out.gamma_2));
  }
  out.fit_ok = pf.converged && qf.converged && out.gamma_1 > 0.0 && out.gamma_2 > 0.0 &&
               std::isfinite(out.gamma_phi_err);
  return out;
}

void analyze_timeline(StabilityTimeline& timeline, int threads) {
  const std::size_t n = timeline.records.size();
  timeline.estimates.assign(n, DecayEstimate{});
  auto work = [&](std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
      const auto& r = timeline.records[i];
      timeline.estimates[i] = estimate_rates_from_decay(r.times, r.power, r.quadrature);
    }
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t per = (n + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
  for (std::size_t first = 0; first < n; first += per) pool.emplace_back(work, first, std::min(n, first + per));
  for (auto& t : pool) t.join();
}

void write_timeline_csv(const std::string& path, const StabilityTimeline& tl) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# sps timeline v1; rates and offsets in Hz\n";
  os << "wall_time_h,flux_point,gamma_1,gamma_1_err,gamma_2,gamma_2_err,gamma_phi,gamma_phi_err,"
        "freq_offset,freq_offset_err,eta_p,eta_p_err,fit_ok,true_gamma_1,true_gamma_2,"
        "true_gamma_phi,true_freq_offset,true_eta_p\n";
  char buf[512];
  for (std::size_t i = 0; i < tl.truth.size(); ++i) {
    const DecayEstimate e = i < tl.estimates.size() ? tl.estimates[i] : DecayEstimate{};
    const SlotTruth& t = tl.truth[i];
    std::snprintf(buf, sizeof buf,
                  "%.6f,%d,%.6e,%.3e,%.6e,%.3e,%.6e,%.3e,%.6e,%.3e,%.6f,%.6f,%d,%.6e,%.6e,%.6e,%.6e,%.6f\n",
                  tl.wall_times[i] / 3600.0, tl.flux_point_id[i], e.gamma_1, e.gamma_1_err, e.gamma_2,
                  e.gamma_2_err, e.gamma_phi, e.gamma_phi_err, e.freq_offset, e.freq_offset_err,
                  e.eta_p, e.eta_p_err, e.fit_ok ? 1 : 0, t.gamma_1, t.gamma_2, t.gamma_phi,
                  t.freq_offset, t.eta_p);
    os << buf;
  }
}

}  // namespace sps
