#include "sps/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "sps/optimize.hpp"

namespace sps {
namespace {

using cd = std::complex<double>;

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

void ReflectionTrace::validate() const {
  if (probe_freqs.size() != r_values.size()) throw std::invalid_argument("ReflectionTrace: length mismatch");
  if (!probe_freqs.allFinite() || !r_values.allFinite()) {
    throw std::invalid_argument("ReflectionTrace: non-finite value");
  }
  for (Eigen::Index i = 1; i < size(); ++i) {
    if (!(probe_freqs[i] > probe_freqs[i - 1])) {
      throw std::invalid_argument("ReflectionTrace: frequencies must increase strictly");
    }
  }
}

cd reflection_model(double delta, double gamma_r, double gamma_2, double phi) {
  if (!(gamma_2 > 0.0)) throw std::domain_error("reflection_model: gamma_2 must be > 0");
  return 1.0 - cd(0.0, gamma_r) * std::polar(1.0, phi) / cd(delta, gamma_2);
}

ReflectionTrace synthetic_trace(const Eigen::VectorXd& freqs, double f01, double gamma_r,
                                double gamma_2, double phi, double noise, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7370u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, noise > 0.0 ? noise : 1.0);
  ReflectionTrace tr;
  tr.probe_freqs = freqs;
  tr.r_values.resize(freqs.size());
  for (Eigen::Index i = 0; i < freqs.size(); ++i) {
    tr.r_values[i] = reflection_model(freqs[i] - f01, gamma_r, gamma_2, phi);
    if (noise > 0.0) tr.r_values[i] += cd(normal(rng), normal(rng));
  }
  return tr;
}

ReflectionFit fit_reflection(const ReflectionTrace& trace, const ReflectionFitOptions& options) {
  trace.validate();
  const Eigen::Index n = trace.size();
  if (n < 50) throw std::invalid_argument("fit_reflection: need at least 50 points");

  ReflectionFit out;
  std::vector<double> dev(static_cast<std::size_t>(n));
  Eigen::Index peak = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    dev[static_cast<std::size_t>(i)] = std::abs(1.0 - trace.r_values[i]);
    if (dev[static_cast<std::size_t>(i)] > dev[static_cast<std::size_t>(peak)]) peak = i;
  }
  const double peak_dev = dev[static_cast<std::size_t>(peak)];
  // noise floor from neighbour differences; the median |dr| of circular
  // Gaussian noise is 1.665 sigma per quadrature
  std::vector<double> steps(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    steps[static_cast<std::size_t>(i)] = std::abs(trace.r_values[i + 1] - trace.r_values[i]);
  }
  const double noise = median(steps) / 1.665;
  if (!(peak_dev > 1e-9) || peak_dev < 5.0 * noise) {
    out.degenerate = true;
    return out;
  }
  // half maximum of |1 - r|^2 sits at delta = +-gamma_2
  const double half = peak_dev / std::sqrt(2.0);
  Eigen::Index lo = peak, hi = peak;
  while (lo > 0 && dev[static_cast<std::size_t>(lo - 1)] >= half) --lo;
  while (hi + 1 < n && dev[static_cast<std::size_t>(hi + 1)] >= half) ++hi;
  const double spacing = (trace.probe_freqs[n - 1] - trace.probe_freqs[0]) / static_cast<double>(n - 1);
  const double w = std::max(0.5 * (trace.probe_freqs[hi] - trace.probe_freqs[lo]), spacing);
  const double f_guess = trace.probe_freqs[peak];
  const cd r_peak = trace.r_values[peak];

  const int np = options.fix_phase ? 3 : 4;
  Eigen::VectorXd x0(np);
  x0[0] = 0.0;
  x0[1] = peak_dev;  // gamma_r / gamma_2 at resonance, in units of w
  x0[2] = 1.0;
  if (!options.fix_phase) x0[3] = std::arg(1.0 - r_peak);

  const ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r.resize(2 * n);
    const double f01 = f_guess + w * x[0];
    const double phi = options.fix_phase ? 0.0 : x[3];
    const cd rot = std::polar(1.0, phi);
    for (Eigen::Index i = 0; i < n; ++i) {
      const cd model = 1.0 - cd(0.0, w * x[1]) * rot / cd(trace.probe_freqs[i] - f01, w * x[2]);
      const cd d = model - trace.r_values[i];
      r[2 * i] = d.real();
      r[2 * i + 1] = d.imag();
    }
  };
  const LeastSquaresResult fit = least_squares(residual, x0, static_cast<int>(2 * n));
  out.f01 = f_guess + w * fit.x[0];
  out.gamma_r = w * fit.x[1];
  out.gamma_2 = w * std::abs(fit.x[2]);
  out.phi = options.fix_phase ? 0.0 : fit.x[3];
  // (gamma_r, phi) and (-gamma_r, phi + pi) give the same trace
  if (out.gamma_r < 0.0 && !options.fix_phase) {
    out.gamma_r = -out.gamma_r;
    out.phi += std::numbers::pi;
  }
  out.phi = std::remainder(out.phi, 2.0 * std::numbers::pi);
  Eigen::Vector4d scale(w, w, w, 1.0);
  out.covariance.topLeftCorner(np, np) = scale.head(np).asDiagonal() * fit.covariance *
                                         scale.head(np).asDiagonal();
  out.errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.residual_norm = fit.residual.norm();
  out.converged = fit.converged && out.gamma_r > 0.0 && out.gamma_2 > 0.0 && !fit.rank_deficient;
  out.narrow_span = trace.probe_freqs[n - 1] - trace.probe_freqs[0] < 10.0 * 2.0 * out.gamma_2;
  return out;
}

double phase_model(double f, const MismatchParams& m) {
  const double two_phi0 = 2.0 * 2.0 * std::numbers::pi * f * m.tau_delay;
  return std::atan2(m.r1 * std::sin(two_phi0), m.t1beta + m.r1 * std::cos(two_phi0));
}

PhaseCurveFit fit_phase_curve(const Eigen::VectorXd& freqs, const Eigen::VectorXd& phis,
                              double beta) {
  if (freqs.size() != phis.size()) throw std::invalid_argument("fit_phase_curve: length mismatch");
  if (!(beta > 0.0)) throw std::invalid_argument("fit_phase_curve: beta must be > 0");
  const Eigen::Index n = freqs.size();
  PhaseCurveFit out;
  if (n < 5) {
    out.underdetermined = true;
    return out;
  }
  const double span = freqs.maxCoeff() - freqs.minCoeff();
  std::vector<double> sorted(freqs.data(), freqs.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double min_gap = span;
  for (std::size_t i = 1; i < sorted.size(); ++i) min_gap = std::min(min_gap, sorted[i] - sorted[i - 1]);
  if (!(span > 0.0) || !(min_gap > 0.0)) {
    out.underdetermined = true;
    return out;
  }
  if (phis.cwiseAbs().maxCoeff() == 0.0) {
    out.params = {0.0, beta * beta, 0.0};
    out.converged = true;
    return out;
  }

  // For fixed tau the small-ratio limit is linear in the ratio; scan tau.
  const double tau_max = 1.0 / (4.0 * min_gap);
  const double step = 1.0 / (40.0 * span);
  double best_tau = 0.0, best_k = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (double tau = step; tau <= tau_max; tau += step) {
    double ss = 0.0, sp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = std::sin(4.0 * std::numbers::pi * freqs[i] * tau);
      ss += s * s;
      sp += s * phis[i];
    }
    if (ss <= 0.0) continue;
    const double k = sp / ss;
    double cost = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = phase_model(freqs[i], {k, 1.0, tau}) - phis[i];
      cost += d * d;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_tau = tau;
      best_k = k;
    }
  }

  const double tau_unit = 1e-9;
  const ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    r.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = phase_model(freqs[i], {x[0], 1.0, x[1] * tau_unit}) - phis[i];
  };
  const LeastSquaresResult fit = least_squares(residual, Eigen::Vector2d(best_k, best_tau / tau_unit),
                                               static_cast<int>(n));
  const double k = fit.x[0];
  const double b2 = beta * beta;
  out.ratio = k;
  out.ratio_error = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
  out.tau_error = std::sqrt(std::max(fit.covariance(1, 1), 0.0)) * tau_unit;
  out.params.tau_delay = fit.x[1] * tau_unit;
  out.params.r1 = k == 0.0 ? 0.0 : (-1.0 + std::sqrt(1.0 + 4.0 * k * k * b2 * b2)) / (2.0 * k * b2);
  out.params.t1beta = (1.0 - out.params.r1 * out.params.r1) * b2;
  out.converged = fit.converged && k >= 0.0;
  out.underdetermined = span < 1.0 / (8.0 * out.params.tau_delay) || fit.rank_deficient;
  return out;
}

cd compensate_mismatch(cd r_raw, double phi) { return 1.0 - (1.0 - r_raw) * std::polar(1.0, -phi); }

ReflectionTrace compensate_trace(const ReflectionTrace& trace, double phi) {
  ReflectionTrace out = trace;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.r_values[i] = compensate_mismatch(trace.r_values[i], phi);
  return out;
}

ReflectionTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<double> f;
  std::vector<cd> r;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'f') continue;
    double a = 0, b = 0, c = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3) {
      throw std::invalid_argument("trace csv: bad row '" + line + "'");
    }
    f.push_back(a);
    r.emplace_back(b, c);
  }
  ReflectionTrace tr;
  tr.probe_freqs = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  tr.r_values = Eigen::Map<Eigen::VectorXcd>(r.data(), static_cast<Eigen::Index>(r.size()));
  tr.validate();
  return tr;
}

void write_trace_csv(const std::string& path, const ReflectionTrace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# sps reflection v1\nf,re_r,im_r\n";
  char buf[120];
  for (Eigen::Index i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.10e,%.10e\n", trace.probe_freqs[i], trace.r_values[i].real(),
                  trace.r_values[i].imag());
    os << buf;
  }
}

}  // namespace sps
