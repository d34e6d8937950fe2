#include "sps/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sps {
namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("DeviceParams." + field + ": " + what);
}

double to_flux_quanta(double phi, const DeviceParams& params) {
  return params.phi0_convention == FluxUnit::kPhase ? phi / kTwoPi : phi;
}

constexpr double kMaxFlux = 0.45;

}  // namespace

void DeviceParams::validate() const {
  require(std::isfinite(f01_max) && f01_max > 0.0, "f01_max", "must be > 0");
  require(std::isfinite(anharm) && anharm > 0.0, "anharm", "must be > 0");
  require(gamma_r >= 0.0, "gamma_r", "must be >= 0");
  require(gamma_n_sweet >= 0.0, "gamma_n_sweet", "must be >= 0");
  require(flux_noise_sqrt_A >= 0.0, "flux_noise_sqrt_A", "must be >= 0");
  require(f_ir > 0.0 && f_ir < gamma_r, "f_ir", "must satisfy 0 < f_ir < gamma_r");
  require(z0 > 0.0, "z0", "must be > 0");
}

RateSet RateSet::from_components(double gamma_r, double gamma_n, double gamma_phi) {
  if (gamma_r < 0.0 || gamma_n < 0.0 || gamma_phi < 0.0) {
    throw std::invalid_argument("RateSet: rates must be >= 0");
  }
  RateSet r;
  r.gamma_r = gamma_r;
  r.gamma_n = gamma_n;
  r.gamma_phi = gamma_phi;
  r.gamma_1 = gamma_r + gamma_n;
  r.gamma_2 = 0.5 * r.gamma_1 + gamma_phi;
  return r;
}

RateSet RateSet::from_radiative_and_coherence(double gamma_r, double gamma_2, double gamma_phi) {
  const double gamma_1 = 2.0 * (gamma_2 - gamma_phi);
  if (gamma_1 < gamma_r) {
    throw std::invalid_argument("RateSet: gamma_2 too small for the given gamma_r");
  }
  return from_components(gamma_r, gamma_1 - gamma_r, gamma_phi);
}

RateSet RateSet::with_gamma_phi(double gamma_phi) const {
  return from_components(gamma_r, gamma_n, gamma_phi);
}

RateSet RateSet::without_decoherence() const {
  RateSet r;
  r.gamma_r = gamma_r;
  return r;
}

bool RateSet::is_consistent(double rel_tol) const {
  const double scale = std::max({gamma_1, gamma_2, 1e-300});
  return gamma_1 >= 0.0 && gamma_2 >= 0.0 && gamma_phi >= 0.0 && gamma_r >= 0.0 &&
         gamma_n >= 0.0 && std::abs(gamma_1 - gamma_r - gamma_n) <= rel_tol * scale &&
         std::abs(gamma_2 - 0.5 * gamma_1 - gamma_phi) <= rel_tol * scale;
}

RateSet table1_rates() { return RateSet::from_radiative_and_coherence(270e3, 188e3, 0.0); }

double flux_to_frequency(double phi, const DeviceParams& params) {
  const double x = to_flux_quanta(phi, params);
  if (!(std::abs(x) <= kMaxFlux)) {
    throw std::domain_error("flux_to_frequency: |phi| must be <= 0.45 Phi0");
  }
  const double c = std::cos(std::numbers::pi * x);
  return (params.f01_max + params.anharm) * std::sqrt(std::abs(c)) - params.anharm;
}

double flux_slope(double phi, const DeviceParams& params) {
  const double x = to_flux_quanta(phi, params);
  if (!(std::abs(x) <= kMaxFlux)) {
    throw std::domain_error("flux_slope: |phi| must be <= 0.45 Phi0");
  }
  const double arg = std::numbers::pi * x;
  return -(params.f01_max + params.anharm) * std::numbers::pi * std::sin(arg) /
         (2.0 * std::sqrt(std::cos(arg)));
}

double frequency_to_flux(double f, const DeviceParams& params) {
  const double ratio = (f + params.anharm) / (params.f01_max + params.anharm);
  const double ratio_min = std::sqrt(std::cos(std::numbers::pi * kMaxFlux));
  if (!(ratio >= ratio_min && ratio <= 1.0)) {
    throw std::domain_error("frequency_to_flux: frequency outside the tunable range");
  }
  const double x = std::acos(ratio * ratio) / std::numbers::pi;
  return params.phi0_convention == FluxUnit::kPhase ? x * kTwoPi : x;
}

GammaNModel linear_gamma_n_model(const DeviceParams& params, double cutoff_detuning) {
  if (!(cutoff_detuning > 0.0)) {
    throw std::invalid_argument("linear_gamma_n_model: cutoff must be > 0");
  }
  DeviceParams in_quanta = params;
  in_quanta.phi0_convention = FluxUnit::kFluxQuantum;
  return [in_quanta, cutoff_detuning](double phi) {
    const double detuning = in_quanta.f01_max - flux_to_frequency(phi, in_quanta);
    return in_quanta.gamma_n_sweet * std::max(0.0, 1.0 - detuning / cutoff_detuning);
  };
}

GammaNModel default_gamma_n_model(const DeviceParams& params) {
  return linear_gamma_n_model(params, kDefaultGammaNCutoff);
}

double flux_noise_dephasing(double phi, double t_phase, const DeviceParams& params) {
  if (!(t_phase > 0.0)) throw std::invalid_argument("flux_noise_dephasing: t_phase must be > 0");
  const double log_term = std::abs(std::log(kTwoPi * params.f_ir * t_phase));
  // Both the slope and the noise amplitude are per Phi0.
  return params.flux_noise_sqrt_A * std::sqrt(log_term) * std::abs(flux_slope(phi, params));
}

RateSet rates_at_flux(double phi, double t_phase, const DeviceParams& params,
                      const GammaNModel& gamma_n_model) {
  const double gamma_phi = flux_noise_dephasing(phi, t_phase, params);
  const double x = to_flux_quanta(phi, params);
  const double gamma_n = gamma_n_model ? gamma_n_model(x) : params.gamma_n_sweet;
  return RateSet::from_components(params.gamma_r, gamma_n, gamma_phi);
}

DephasingTimeSolution self_consistent_dephasing_time(std::span<const double> phis,
                                                     const DeviceParams& params) {
  DephasingTimeSolution sol;
  sol.t_phase = 1.0 / (kTwoPi * params.gamma_r);
  if (phis.empty()) return sol;
  for (int it = 1; it <= 50; ++it) {
    double mean = 0.0;
    for (double phi : phis) mean += flux_noise_dephasing(phi, sol.t_phase, params);
    mean /= static_cast<double>(phis.size());
    sol.iterations = it;
    sol.mean_gamma_phi = mean;
    if (mean <= 0.0) {
      // Only sweet-spot points: gamma_phi vanishes for any t.
      sol.converged = true;
      return sol;
    }
    const double next = 1.0 / (kTwoPi * mean);
    const double rel = std::abs(next - sol.t_phase) / sol.t_phase;
    sol.t_phase = next;
    if (rel < 1e-3) {
      sol.converged = true;
      return sol;
    }
  }
  return sol;
}

EfficiencyBudget efficiency_decomposition(const RateSet& rates) {
  if (!(rates.gamma_2 > 0.0)) {
    throw std::domain_error("efficiency_decomposition: gamma_2 must be > 0");
  }
  EfficiencyBudget b;
  b.eta_q = rates.gamma_r / (2.0 * rates.gamma_2);
  b.eta_p = rates.gamma_phi / rates.gamma_2;
  b.eta_n = rates.gamma_n / (2.0 * rates.gamma_2);
  return b;
}

}  // namespace sps
