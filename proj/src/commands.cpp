#include "sps/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "sps/dynamics.hpp"
#include "sps/measurement.hpp"
#include "sps/optimize.hpp"
#include "sps/pulses.hpp"
#include "sps/spectroscopy.hpp"
#include "sps/stability.hpp"
#include "sps/tomography.hpp"

namespace sps {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
constexpr double kPi = std::numbers::pi;

std::string prepare_dir(const RunOptions& options) {
  fs::create_directories(options.out_dir);
  return options.out_dir;
}

std::string path_in(const RunOptions& options, const std::string& name) {
  return (fs::path(options.out_dir) / name).string();
}

void finish(CommandResult& result, const RunOptions& options, const std::string& command) {
  result.report["command"] = command;
  result.report["schema"] = "sps report v1";
  result.report["warnings"] = result.warnings;
  const std::string p = path_in(options, "report.json");
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot open " + p);
  os << result.report.dump(2) << "\n";
  result.files.push_back(p);
}

json rates_json(const RateSet& r) {
  return {{"gamma_1", r.gamma_1}, {"gamma_2", r.gamma_2}, {"gamma_phi", r.gamma_phi},
          {"gamma_r", r.gamma_r}, {"gamma_n", r.gamma_n}};
}

QubitTrajectory run_pulse(const ComplexEnvelope& drive, const ExperimentConfig& cfg, const RateSet& rates,
                          bool three_level) {
  const double omega_peak = rabi_from_amplitude(drive.samples.cwiseAbs().maxCoeff(), rates.gamma_r);
  const double detuning = cfg.pulse.detuning;
  if (three_level) {
    const double dt = std::min(drive.dt, max_stable_dt(omega_peak, detuning, rates, cfg.device.anharm));
    return simulate_three_level(drive, detuning, cfg.device.anharm, rates, dt);
  }
  const double dt = std::min(drive.dt, max_stable_dt(omega_peak, detuning, rates));
  return simulate_bloch(drive, detuning, rates, dt);
}

ComplexEnvelope make_pulse(const ExperimentConfig& cfg, double area) {
  const PulseBlock& p = cfg.pulse;
  return gaussian_pulse(p.duration, p.sigma, area, p.detuning, p.dt, cfg.device.gamma_r);
}

double photons(const ComplexEnvelope& field, const ExperimentConfig& cfg, double t0, double t1) {
  const double f = cfg.device.f01_max;
  return photon_number(voltage_from_field(field, f, cfg.device.z0), 0.0, f, cfg.device.z0, t0, t1);
}

std::string area_label(double area) {
  if (area == 0.0) return "vacuum";
  if (std::abs(area - kPi) < 1e-9) return "pi";
  if (std::abs(area - kPi / 2) < 1e-9) return "pi_half";
  char buf[32];
  std::snprintf(buf, sizeof buf, "area_%.4f", area);
  return buf;
}

}  // namespace

CommandResult cmd_emit(const ExperimentConfig& cfg, const RunOptions& options) {
  prepare_dir(options);
  CommandResult res;
  const RateSet rates = cfg.sweet_spot_rates();
  const PulseBlock& pb = cfg.pulse;

  // pi pulse followed by free decay
  const ComplexEnvelope drive = pad_envelope(make_pulse(cfg, kPi), pb.free_decay);
  const QubitTrajectory traj = run_pulse(drive, cfg, rates, pb.three_level);
  const ComplexEnvelope emission = emitted_field(traj, rates.gamma_r);
  const ComplexEnvelope reflected = reflected_field(drive, traj, rates.gamma_r);
  const Eigen::Index i_end = std::lround(pb.duration / pb.dt);
  const double t_end = drive.time(i_end);

  // cancellation is calibrated with the qubit detuned: the line reflects the drive alone
  const double e_in = drive.energy();
  const CancellationSetting ideal{1.0, kPi, 0.0};
  const double exact_db = suppression_db(apply_cancellation(drive, drive, ideal).energy(), e_in);
  const CancellationSetting with_error{1.0 - pb.amp_error, kPi, 0.0};
  const double amp_error_db = suppression_db(apply_cancellation(drive, drive, with_error).energy(), e_in);
  const CancellationSetting start{1.0 + 2.0 * pb.amp_error, kPi + 0.1, 0.3 * drive.dt};
  const CancellationCalibration cal = calibrate_cancellation(drive, drive, start);
  const double cal_db = 10.0 * std::log10(std::max(cal.residual_fraction, 1e-300));
  if (!cal.converged) res.warnings.push_back("cancellation calibration did not converge");

  const ComplexEnvelope cancelled = apply_cancellation(reflected, drive, cal.setting);
  const ComplexEnvelope leak = apply_cancellation(drive, drive, cal.setting);

  // photon accounting
  const double t_last = drive.t_end();
  const double n_in = photons(drive, cfg, drive.t0, t_last);
  const double n_out = photons(reflected, cfg, drive.t0, t_last);
  const double n_emit_pi = photons(emission, cfg, t_end, t_last);
  const double n_cancelled = photons(cancelled, cfg, drive.t0, t_last);

  // pi/2: ideal rotation, then free decay with the full rates
  const ComplexEnvelope half = make_pulse(cfg, kPi / 2);
  const QubitTrajectory rot = run_pulse(half, cfg, rates.without_decoherence(), false);
  const Eigen::Index n_free = static_cast<Eigen::Index>(std::ceil(pb.free_decay / pb.dt)) + 1;
  const ComplexEnvelope idle = ComplexEnvelope::zeros(pb.dt, n_free);
  const Eigen::MatrixXcd rho0 = rot.final_state.topLeftCorner(2, 2);
  const QubitTrajectory decay = simulate_bloch(idle, 0.0, rates, std::min(pb.dt, max_stable_dt(0.0, 0.0, rates)), rho0);
  const ComplexEnvelope emission_half = emitted_field(decay, rates.gamma_r);
  const double n_q = photons(emission_half, cfg, 0.0, emission_half.t_end());
  const double n_q_formula = rates.gamma_r / (8.0 * rates.gamma_2);

  // pi/2 with the realistic pulse
  const QubitTrajectory real_half = run_pulse(pad_envelope(half, pb.free_decay), cfg, rates, pb.three_level);
  const ComplexEnvelope emission_real = emitted_field(real_half, rates.gamma_r);
  const double n_q_pulse = photons(emission_real, cfg, t_end, emission_real.t_end());

  const double n_leak_meas = photons(leak, cfg, drive.t0, t_last);
  const double n_leak = leakage_estimate(n_leak_meas, n_q_pulse, rates);

  res.report["rates"] = rates_json(rates);
  res.report["pulse"] = {{"duration", pb.duration}, {"dt", pb.dt}, {"three_level", pb.three_level},
                         {"rho11_pi", traj.populations(i_end, 1)},
                         {"leakage_level2", pb.three_level ? traj.populations(i_end, 2) : 0.0},
                         {"abs_sigma_minus_pi_half", std::abs(real_half.coherence[i_end])}};
  res.report["photons"] = {{"n_in", n_in},           {"n_out", n_out},
                           {"n_emitted_pi", n_emit_pi}, {"n_after_cancellation", n_cancelled},
                           {"n_q", n_q},             {"n_q_formula", n_q_formula},
                           {"n_q_pulse", n_q_pulse}};
  res.report["suppression"] = {
      {"exact_db", exact_db},
      {"amp_error", pb.amp_error},
      {"amp_error_db", amp_error_db},
      {"amp_error_db_analytic", 20.0 * std::log10(pb.amp_error)},
      {"calibrated_db", cal_db},
      {"iterations", cal.iterations},
      {"converged", cal.converged},
      {"amp_scale", cal.setting.amp_scale},
      {"port_amp_scale", cal.setting.amp_scale / pb.attenuation},
      {"attenuation", pb.attenuation},
      {"phase", cal.setting.phase},
      {"delay", cal.setting.delay}};
  res.report["leakage"] = {{"n_leak_meas", n_leak_meas}, {"n_leak", n_leak}};

  const auto write = [&](const std::string& name, const ComplexEnvelope& env) {
    const std::string p = path_in(options, name);
    write_envelope_csv(p, env);
    res.files.push_back(p);
  };
  write("drive.csv", drive);
  write("reflected.csv", reflected);
  write("cancelled.csv", cancelled);
  write("emission_pi_half.csv", emission_half);
  const std::string tp = path_in(options, "trajectory_pi.csv");
  write_trajectory_csv(tp, traj);
  res.files.push_back(tp);
  finish(res, options, "emit");
  return res;
}

CommandResult cmd_tomography(const ExperimentConfig& cfg, const RunOptions& options) {
  prepare_dir(options);
  CommandResult res;
  const RateSet rates = cfg.sweet_spot_rates();
  const TomographyBlock& tb = cfg.tomography;
  const double filter = tb.filter_rate > 0.0 ? tb.filter_rate : rates.gamma_1;
  MeasurementConfig mc = cfg.measurement;
  mc.threads = std::max(1, options.threads);

  const std::string mp = path_in(options, "moments.csv");
  std::ofstream moments_os(mp);
  if (!moments_os) throw std::runtime_error("cannot open " + mp);
  moments_os << "# sps moments v1\nlabel,n,k,re,im,sigma\n";
  res.files.push_back(mp);

  json cases = json::array();
  for (std::size_t c = 0; c < tb.areas.size(); ++c) {
    const double area = tb.areas[c];
    const std::string label = area_label(area);
    mc.seed = cfg.seed * 1000003ULL + c;

    ShotSet shots;
    DensityMatrix truth;
    if (area == 0.0 || tb.route == "state") {
      Eigen::MatrixXcd qubit = Eigen::MatrixXcd::Zero(2, 2);
      qubit(0, 0) = 1.0;
      if (area > 0.0) qubit = run_pulse(make_pulse(cfg, area), cfg, rates, cfg.pulse.three_level).final_state;
      truth = emission_mode_state(qubit, rates, filter, cfg.pulse.detuning);
      shots = synthesize_state_shots(truth, mc, filter);
    } else {
      // records route: classical emission field, record starts at the pulse end
      const double record = std::max(cfg.pulse.free_decay, 1.2 * min_record_duration(filter));
      const ComplexEnvelope drive = pad_envelope(make_pulse(cfg, area), record);
      const QubitTrajectory traj = run_pulse(drive, cfg, rates, cfg.pulse.three_level);
      const ComplexEnvelope e = emitted_field(traj, rates.gamma_r);
      const Eigen::Index i0 = std::lround(cfg.pulse.duration / cfg.pulse.dt);
      const ComplexEnvelope tail(e.dt, e.samples.segment(i0, e.size() - i0), 0.0, e.carrier_detuning);
      shots = synthesize_shots(tail, mc, filter);
      truth = emission_mode_state(traj.final_state, rates, filter, cfg.pulse.detuning);
    }
    if (tb.write_shots) {
      const std::string sp = path_in(options, "shots_" + label + ".csv");
      write_shots_csv(sp, shots);
      res.files.push_back(sp);
    }

    const MomentSet m = extract_field_moments(shots, kMaxMomentOrder, tb.bootstrap, mc.seed + 17, mc.threads);
    if (m.insufficient_shots) res.warnings.push_back(label + ": insufficient shots");
    if (m.nonphysical) res.warnings.push_back(label + ": nonphysical photon number");
    for (int n = 0; n <= kMaxMomentOrder; ++n) {
      for (int k = 0; n + k <= kMaxMomentOrder; ++k) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.10e,%.10e,%.4e\n", label.c_str(), n, k, m.m(n, k).real(),
                      m.m(n, k).imag(), m.sigma(n, k));
        moments_os << buf;
      }
    }

    json jc = {{"label", label},
               {"area", area},
               {"n_shots", m.n_shots},
               {"photon_number", m.photon_number()},
               {"photon_number_err", m.sigma(1, 1)},
               {"abs_mean_field", std::abs(m.mean_field())},
               {"abs_mean_field_err", m.sigma(0, 1)},
               {"second_order", m.second_order()},
               {"model_photon_number", truth.rho(1, 1).real() + 2.0 * truth.rho(2, 2).real()},
               {"model_abs_mean_field", std::abs(moments_from_rho(truth).mean_field())}};
    try {
      // a photon number not resolved above zero leaves g2 without meaning
      if (m.photon_number() <= 2.0 * m.sigma(1, 1)) throw UndefinedValueError("unresolved photon number");
      const G2Result g2 = g2_zero(m);
      jc["g2"] = g2.value;
      jc["g2_err"] = g2.error;
      jc["g2_undefined"] = false;
    } catch (const UndefinedValueError&) {
      jc["g2"] = nullptr;
      jc["g2_undefined"] = true;
      res.warnings.push_back(label + ": g2 undefined, photon number not resolved above zero");
    }

    const MleResult mle = mle_density_matrix(m);
    if (!mle.converged) res.warnings.push_back(label + ": maximum likelihood did not converge");
    json rho = json::array();
    for (int i = 0; i < kFockDim; ++i) {
      for (int j = 0; j < kFockDim; ++j) rho.push_back({mle.state.rho(i, j).real(), mle.state.rho(i, j).imag()});
    }
    jc["mle"] = {{"rho", rho},
                 {"chi_square", mle.chi_square},
                 {"converged", mle.converged},
                 {"best_restart", mle.best_restart},
                 {"fidelity_to_model", fidelity(mle.state, truth)}};
    jc["wigner_origin"] = wigner(mle.state, 0.0).value;

    const std::string wp = path_in(options, "wigner_" + label + ".csv");
    write_wigner_csv(wp, wigner_grid(mle.state, tb.wigner_extent, tb.wigner_points));
    res.files.push_back(wp);
    cases.push_back(jc);
  }
  res.report["filter_rate"] = filter;
  res.report["route"] = tb.route;
  res.report["noise_photons"] = mc.noise_photons;
  res.report["cases"] = cases;
  finish(res, options, "tomography");
  return res;
}

CommandResult cmd_spectroscopy(const ExperimentConfig& cfg, const RunOptions& options) {
  prepare_dir(options);
  CommandResult res;
  const SpectroscopyBlock& sb = cfg.spectroscopy;
  const DeviceParams& dev = cfg.device;
  const int nf = sb.flux_points;

  std::vector<double> f01(static_cast<std::size_t>(nf)), phis(f01.size());
  for (int i = 0; i < nf; ++i) {
    f01[static_cast<std::size_t>(i)] = nf == 1 ? sb.f_max : sb.f_min + (sb.f_max - sb.f_min) * i / (nf - 1);
    phis[static_cast<std::size_t>(i)] = frequency_to_flux(f01[static_cast<std::size_t>(i)], dev);
  }
  const DephasingTimeSolution tp = self_consistent_dephasing_time(phis, dev);
  const GammaNModel gn = default_gamma_n_model(dev);

  const std::string cp = path_in(options, "spectroscopy.csv");
  std::ofstream os(cp);
  if (!os) throw std::runtime_error("cannot open " + cp);
  os << "# sps spectroscopy v1; frequencies and rates in Hz, phases in rad\n"
        "flux,f01,gamma_r,gamma_2,gamma_phi,gamma_n,eta_q,eta_p,eta_n,phi,"
        "fit_f01,fit_phi,fit_phi_err,fit_gamma_r,fit_gamma_r_err,fit_gamma_2,fit_gamma_2_err,"
        "comp_gamma_r,comp_gamma_r_err,comp_gamma_2,comp_gamma_2_err,fit_eta_q,converged\n";
  res.files.push_back(cp);

  int within = 0, fitted = 0;
  double identity_error = 0.0;
  std::vector<double> fit_f, fit_phi;
  for (int i = 0; i < nf; ++i) {
    const double phi_flux = phis[static_cast<std::size_t>(i)];
    const double f = f01[static_cast<std::size_t>(i)];
    const RateSet r = rates_at_flux(phi_flux, tp.t_phase, dev, gn);
    const EfficiencyBudget eb = efficiency_decomposition(r);
    identity_error = std::max(identity_error, std::abs(eb.sum() - 1.0));
    const double phase = phase_model(f, sb.mismatch);

    Eigen::VectorXd freqs = Eigen::VectorXd::LinSpaced(sb.trace_points, f - sb.span / 2, f + sb.span / 2);
    const ReflectionTrace raw = synthetic_trace(freqs, f, r.gamma_r, r.gamma_2, phase, sb.noise,
                                                cfg.seed * 7919ULL + static_cast<std::uint64_t>(i));
    const ReflectionFit fit = fit_reflection(raw);
    ReflectionFit comp;
    if (!fit.degenerate) {
      ReflectionFitOptions fixed;
      fixed.fix_phase = true;
      comp = fit_reflection(compensate_trace(raw, fit.phi), fixed);
    }
    const bool ok = fit.converged && comp.converged;
    if (!ok) {
      res.warnings.push_back("flux point " + std::to_string(i) + ": reflection fit failed");
    } else {
      ++fitted;
      fit_f.push_back(fit.f01);
      fit_phi.push_back(fit.phi);
      if (std::abs(comp.gamma_r - r.gamma_r) <= 2.0 * comp.errors[1] &&
          std::abs(comp.gamma_2 - r.gamma_2) <= 2.0 * comp.errors[2]) {
        ++within;
      }
    }
    if (fit.narrow_span) res.warnings.push_back("flux point " + std::to_string(i) + ": span below 10 linewidths");
    if (i == nf - 1) {
      const std::string a = path_in(options, "trace_raw.csv"), b = path_in(options, "trace_compensated.csv");
      write_trace_csv(a, raw);
      write_trace_csv(b, compensate_trace(raw, fit.phi));
      res.files.push_back(a);
      res.files.push_back(b);
    }
    char buf[768];
    std::snprintf(buf, sizeof buf,
                  "%.8f,%.6f,%.6e,%.6e,%.6e,%.6e,%.8f,%.8f,%.8f,%.8f,%.6f,%.8f,%.3e,%.6e,%.3e,%.6e,%.3e,"
                  "%.6e,%.3e,%.6e,%.3e,%.8f,%d\n",
                  phi_flux, f, r.gamma_r, r.gamma_2, r.gamma_phi, r.gamma_n, eb.eta_q, eb.eta_p, eb.eta_n, phase,
                  fit.f01, fit.phi, fit.errors[3], fit.gamma_r, fit.errors[1], fit.gamma_2, fit.errors[2],
                  comp.gamma_r, comp.errors[1], comp.gamma_2, comp.errors[2],
                  comp.gamma_2 > 0.0 ? comp.gamma_r / (2.0 * comp.gamma_2) : 0.0, ok ? 1 : 0);
    os << buf;
  }

  json phase_json = {{"fitted", false}};
  if (fit_f.size() >= 5) {
    const PhaseCurveFit pc = fit_phase_curve(Eigen::Map<Eigen::VectorXd>(fit_f.data(), static_cast<Eigen::Index>(fit_f.size())),
                                             Eigen::Map<Eigen::VectorXd>(fit_phi.data(), static_cast<Eigen::Index>(fit_phi.size())),
                                             sb.beta);
    phase_json = {{"fitted", true},           {"r1", pc.params.r1},
                  {"t1beta", pc.params.t1beta}, {"tau_delay", pc.params.tau_delay},
                  {"ratio", pc.ratio},        {"ratio_err", pc.ratio_error},
                  {"tau_err", pc.tau_error},  {"converged", pc.converged},
                  {"underdetermined", pc.underdetermined}};
    if (!pc.converged) res.warnings.push_back("phase curve fit did not converge");
    if (pc.underdetermined) res.warnings.push_back("phase curve fit underdetermined");
  } else {
    res.warnings.push_back("phase curve fit skipped: fewer than 5 fitted points");
  }
  res.report["t_phase"] = tp.t_phase;
  res.report["flux_points"] = nf;
  res.report["fitted_points"] = fitted;
  res.report["within_2sigma"] = within;
  res.report["budget_identity_max_error"] = identity_error;
  res.report["injected_mismatch"] = {{"r1", sb.mismatch.r1}, {"t1beta", sb.mismatch.t1beta},
                                     {"tau_delay", sb.mismatch.tau_delay}};
  res.report["phase_curve"] = phase_json;
  finish(res, options, "spectroscopy");
  return res;
}

CommandResult cmd_stability(const ExperimentConfig& cfg, const RunOptions& options) {
  prepare_dir(options);
  CommandResult res;
  StabilityConfig sc = cfg.stability;
  sc.threads = std::max(1, options.threads);
  StabilityTimeline tl = generate_stability_dataset(sc, cfg.device, cfg.seed);
  analyze_timeline(tl, sc.threads);

  const std::size_t n = tl.truth.size();
  int failed = 0;
  std::array<int, 3> cover{0, 0, 0};
  std::array<int, 2> per_point{0, 0};
  std::array<double, 2> max_eta_p{0.0, 0.0}, mean_eta_q{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const DecayEstimate& e = tl.estimates[i];
    const SlotTruth& t = tl.truth[i];
    const int p = tl.flux_point_id[i];
    ++per_point[static_cast<std::size_t>(p)];
    if (!e.fit_ok) {
      ++failed;
      continue;
    }
    cover[0] += std::abs(e.gamma_1 - t.gamma_1) <= 2.0 * e.gamma_1_err;
    cover[1] += std::abs(e.gamma_2 - t.gamma_2) <= 2.0 * e.gamma_2_err;
    cover[2] += std::abs(e.gamma_phi - t.gamma_phi) <= 2.0 * e.gamma_phi_err;
    max_eta_p[static_cast<std::size_t>(p)] = std::max(max_eta_p[static_cast<std::size_t>(p)], e.eta_p);
    mean_eta_q[static_cast<std::size_t>(p)] += cfg.device.gamma_r / (2.0 * e.gamma_2);
  }
  if (failed > 0) res.warnings.push_back(std::to_string(failed) + " slot fits failed");
  const double ok = static_cast<double>(n) - failed;
  json points = json::array();
  for (std::size_t p = 0; p < 2; ++p) {
    points.push_back({{"flux", sc.flux_points[p]},
                      {"slots", per_point[p]},
                      {"max_eta_p", max_eta_p[p]},
                      {"mean_eta_q", per_point[p] > 0 ? mean_eta_q[p] / per_point[p] : 0.0}});
  }
  json tls = json::array();
  for (std::size_t k = 0; k < tl.tls_states.size(); ++k) {
    double active = 0.0;
    for (auto s : tl.tls_states[k]) active += s;
    tls.push_back({{"gamma_switch", sc.tls[k].tls.gamma_switch},
                   {"flux_point", sc.tls[k].flux_point},
                   {"active_fraction", tl.tls_states[k].empty() ? 0.0 : active / tl.tls_states[k].size()}});
  }
  res.report["slots"] = n;
  res.report["failed_fits"] = failed;
  res.report["coverage_2sigma"] = {{"gamma_1", ok > 0 ? cover[0] / ok : 0.0},
                                   {"gamma_2", ok > 0 ? cover[1] / ok : 0.0},
                                   {"gamma_phi", ok > 0 ? cover[2] / ok : 0.0}};
  res.report["flux_points"] = points;
  res.report["tls"] = tls;
  res.report["flux_jumps"] = tl.jumps;

  const std::string p = path_in(options, "timeline.csv");
  write_timeline_csv(p, tl);
  res.files.push_back(p);
  finish(res, options, "stability");
  return res;
}

CommandResult cmd_rabi(const ExperimentConfig& cfg, const RunOptions& options) {
  prepare_dir(options);
  CommandResult res;
  const RabiBlock& rb = cfg.rabi;
  const RateSet rates = cfg.sweet_spot_rates();
  const ComplexEnvelope drive = constant_drive(rb.omega, rb.max_tau, rb.tau_step, rates.gamma_r);
  const double dt = std::min(rb.tau_step, max_stable_dt(rb.omega, 0.0, rates));
  const QubitTrajectory traj = simulate_bloch(drive, 0.0, rates, dt);
  const Eigen::Index n = traj.size();

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x7261u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd tau = traj.times, sig_i(n), sig_p(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    sig_i[k] = traj.bloch(k, 1) + rb.noise * normal(rng);
    sig_p[k] = 0.5 * (1.0 + traj.bloch(k, 2)) + rb.noise * normal(rng);
  }

  // coarse frequency from the strongest Fourier component of P
  const double mean_p = sig_p.mean();
  const double span = tau[n - 1] - tau[0];
  double best_f = 0.0, best_amp = -1.0;
  for (double f = 1.0 / span; f <= 0.25 / rb.tau_step; f += 0.05 / span) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) acc += (sig_p[k] - mean_p) * std::polar(1.0, -kTwoPi * f * tau[k]);
    if (std::abs(acc) > best_amp) {
      best_amp = std::abs(acc);
      best_f = f;
    }
  }

  // p = cI, aI, cP, aP, gamma_s [1e5 Hz], omega_m [1e6 Hz], theta1, theta2
  const ResidualFn residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(2 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double env = std::exp(-kTwoPi * p[4] * 1e5 * tau[k]);
      const double ph = kTwoPi * p[5] * 1e6 * tau[k];
      r[k] = p[0] + p[1] * env * std::sin(ph - p[6]) - sig_i[k];
      r[n + k] = p[2] - p[3] * env * std::sin(ph + p[7]) - sig_p[k];
    }
  };
  Eigen::VectorXd x0(8);
  const double a_i = 0.5 * (sig_i.maxCoeff() - sig_i.minCoeff());
  const double a_p = 0.5 * (sig_p.maxCoeff() - sig_p.minCoeff());
  x0 << sig_i.mean(), a_i, mean_p, a_p, 1.0 / (kTwoPi * span) / 1e5, best_f / 1e6, kPi / 4, kPi / 4;
  const LeastSquaresResult fit = least_squares(residual, x0, static_cast<int>(2 * n));
  if (!fit.converged) res.warnings.push_back("rabi fit did not converge");

  const RabiParams expect = RabiParams::from(rb.omega, rates);
  const double theta_sum = fit.x[6] + fit.x[7];
  const double theta_err =
      std::sqrt(std::max(0.0, fit.covariance(6, 6) + fit.covariance(7, 7) + 2.0 * fit.covariance(6, 7)));
  res.report["omega"] = rb.omega;
  res.report["rates"] = rates_json(rates);
  res.report["fit"] = {{"theta_sum_over_pi", theta_sum / kPi},
                       {"theta_sum_err_over_pi", theta_err / kPi},
                       {"theta1", fit.x[6]},
                       {"theta2", fit.x[7]},
                       {"gamma_s", fit.x[4] * 1e5},
                       {"gamma_s_err", std::sqrt(std::max(0.0, fit.covariance(4, 4))) * 1e5},
                       {"omega_m", fit.x[5] * 1e6},
                       {"converged", fit.converged}};
  res.report["expected"] = {{"theta_sum_over_pi", (expect.theta1 + expect.theta2) / kPi},
                            {"gamma_s", expect.gamma_s},
                            {"omega_m", expect.omega_m}};

  const std::string p = path_in(options, "rabi.csv");
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot open " + p);
  os << "# sps rabi v1; I is sigma_y, P the excited population\ntau,I,P,fit_I,fit_P\n";
  Eigen::VectorXd r;
  residual(fit.x, r);
  char buf[160];
  for (Eigen::Index k = 0; k < n; ++k) {
    std::snprintf(buf, sizeof buf, "%.6e,%.8f,%.8f,%.8f,%.8f\n", tau[k], sig_i[k], sig_p[k], sig_i[k] + r[k],
                  sig_p[k] + r[n + k]);
    os << buf;
  }
  res.files.push_back(p);
  finish(res, options, "rabi");
  return res;
}

}  // namespace sps
