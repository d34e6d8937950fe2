#include "sps/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sps {
namespace {

using nlohmann::json;

// Reads the members of one JSON object, rejecting keys nobody asked for.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  void number(const char* key, double& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number()) throw ConfigError(field(key) + ": expected a number");
    out = it->get<double>();
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a validate() and re-raises its message under the block name.
template <typename F>
void checked(const std::string& block, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(block + ": " + e.what());
  }
}

void require(bool ok, const std::string& field, const char* what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

void read_device(const json& j, DeviceParams& d) {
  Block b(j, "device");
  b.number("f01_max", d.f01_max);
  b.number("anharm", d.anharm);
  b.number("gamma_r", d.gamma_r);
  b.number("gamma_n_sweet", d.gamma_n_sweet);
  b.number("flux_noise_sqrt_A", d.flux_noise_sqrt_A);
  b.number("f_ir", d.f_ir);
  b.number("z0", d.z0);
  if (b.has("phi0_convention")) {
    std::string s;
    b.get("phi0_convention", s);
    if (s == "flux_quantum") {
      d.phi0_convention = FluxUnit::kFluxQuantum;
    } else if (s == "phase") {
      d.phi0_convention = FluxUnit::kPhase;
    } else {
      throw ConfigError("device.phi0_convention: expected \"flux_quantum\" or \"phase\"");
    }
  }
  b.finish();
  checked("device", [&] { d.validate(); });
}

void read_measurement(const json& j, MeasurementConfig& m) {
  Block b(j, "measurement");
  b.number("gain", m.gain);
  b.number("noise_photons", m.noise_photons);
  b.number("sample_rate", m.sample_rate);
  b.get("n_shots", m.n_shots);
  b.get("include_vacuum", m.include_vacuum);
  b.number("frequency", m.frequency);
  b.number("z0", m.z0);
  b.get("threads", m.threads);
  b.finish();
}

void read_pulse(const json& j, PulseBlock& p) {
  Block b(j, "pulse");
  b.number("duration", p.duration);
  b.number("sigma", p.sigma);
  b.number("dt", p.dt);
  b.number("detuning", p.detuning);
  b.number("free_decay", p.free_decay);
  b.get("three_level", p.three_level);
  b.number("attenuation", p.attenuation);
  b.number("amp_error", p.amp_error);
  b.finish();
  require(p.duration > 0.0, "pulse.duration", "must be > 0");
  require(p.dt > 0.0 && p.dt < p.duration, "pulse.dt", "must be in (0, duration)");
  require(p.free_decay >= 0.0, "pulse.free_decay", "must be >= 0");
  require(p.attenuation > 0.0, "pulse.attenuation", "must be > 0");
  require(p.amp_error > 0.0 && p.amp_error < 1.0, "pulse.amp_error", "must be in (0, 1)");
}

void read_tomography(const json& j, TomographyBlock& t) {
  Block b(j, "tomography");
  b.get("areas", t.areas);
  b.number("filter_rate", t.filter_rate);
  b.get("route", t.route);
  b.get("bootstrap", t.bootstrap);
  b.number("wigner_extent", t.wigner_extent);
  b.get("wigner_points", t.wigner_points);
  b.get("write_shots", t.write_shots);
  b.finish();
  require(!t.areas.empty(), "tomography.areas", "must not be empty");
  for (double a : t.areas) require(a >= 0.0, "tomography.areas", "entries must be >= 0");
  require(t.route == "state" || t.route == "records", "tomography.route",
          "expected \"state\" or \"records\"");
  require(t.bootstrap >= 2, "tomography.bootstrap", "must be >= 2");
  require(t.wigner_extent > 0.0, "tomography.wigner_extent", "must be > 0");
  require(t.wigner_points >= 2, "tomography.wigner_points", "must be >= 2");
}

void read_spectroscopy(const json& j, SpectroscopyBlock& s) {
  Block b(j, "spectroscopy");
  b.number("f_min", s.f_min);
  b.number("f_max", s.f_max);
  b.get("flux_points", s.flux_points);
  b.number("span", s.span);
  b.get("trace_points", s.trace_points);
  b.number("noise", s.noise);
  b.number("beta", s.beta);
  if (b.has("mismatch")) {
    Block m(b.at("mismatch"), "spectroscopy.mismatch");
    m.number("r1", s.mismatch.r1);
    m.number("t1beta", s.mismatch.t1beta);
    m.number("tau_delay", s.mismatch.tau_delay);
    m.finish();
  }
  b.finish();
  require(s.f_min > 0.0 && s.f_min < s.f_max, "spectroscopy.f_min", "must satisfy 0 < f_min < f_max");
  require(s.flux_points >= 1, "spectroscopy.flux_points", "must be >= 1");
  require(s.span > 0.0, "spectroscopy.span", "must be > 0");
  require(s.trace_points >= 50, "spectroscopy.trace_points", "must be >= 50");
  require(s.noise >= 0.0, "spectroscopy.noise", "must be >= 0");
  require(s.beta > 0.0, "spectroscopy.beta", "must be > 0");
}

void read_tls(const json& j, const std::string& path, StabilityTls& t) {
  Block b(j, path);
  b.number("gamma_switch", t.tls.gamma_switch);
  b.number("chi", t.tls.chi);
  b.number("g", t.tls.g);
  b.number("delta_tls", t.tls.delta_tls);
  b.get("state", t.tls.state);
  b.get("flux_point", t.flux_point);
  b.number("dephasing_cap", t.dephasing_cap);
  b.finish();
}

void read_stability(const json& j, StabilityConfig& s) {
  Block b(j, "stability");
  b.number("duration", s.duration);
  b.get("slots", s.slots);
  b.get("flux_points", s.flux_points);
  if (b.has("tls")) {
    const json& arr = b.at("tls");
    if (!arr.is_array()) throw ConfigError("stability.tls: expected an array");
    s.tls.assign(arr.size(), StabilityTls{});
    for (std::size_t i = 0; i < arr.size(); ++i) {
      read_tls(arr[i], "stability.tls[" + std::to_string(i) + "]", s.tls[i]);
    }
  }
  if (b.has("jumps")) {
    Block jb(b.at("jumps"), "stability.jumps");
    jb.number("rate", s.jumps.rate);
    jb.number("sigma", s.jumps.sigma);
    jb.finish();
  }
  b.get("flux_drift", s.flux_drift);
  b.number("record_dt", s.record_dt);
  b.get("record_points", s.record_points);
  b.number("power_noise", s.power_noise);
  b.number("quadrature_noise", s.quadrature_noise);
  b.number("gamma_n_cutoff", s.gamma_n_cutoff);
  b.get("threads", s.threads);
  b.finish();
  checked("stability", [&] { s.validate(); });
}

void read_rabi(const json& j, RabiBlock& r) {
  Block b(j, "rabi");
  b.number("omega", r.omega);
  b.number("max_tau", r.max_tau);
  b.number("tau_step", r.tau_step);
  b.number("noise", r.noise);
  b.finish();
  require(r.omega > 0.0, "rabi.omega", "must be > 0");
  require(r.tau_step > 0.0 && r.max_tau > 20.0 * r.tau_step, "rabi.max_tau",
          "must exceed 20 tau_step");
  require(r.noise >= 0.0, "rabi.noise", "must be >= 0");
}

}  // namespace

RateSet ExperimentConfig::sweet_spot_rates() const {
  return RateSet::from_components(device.gamma_r, device.gamma_n_sweet, 0.0);
}

void ExperimentConfig::validate() const {
  checked("device", [&] { device.validate(); });
  checked("measurement", [&] { measurement.validate(); });
  checked("stability", [&] { stability.validate(); });
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Block top(j, "");
  if (top.has("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (top.has("device")) read_device(j.at("device"), cfg.device);
  if (top.has("measurement")) read_measurement(j.at("measurement"), cfg.measurement);
  if (top.has("pulse")) read_pulse(j.at("pulse"), cfg.pulse);
  if (top.has("tomography")) read_tomography(j.at("tomography"), cfg.tomography);
  if (top.has("spectroscopy")) read_spectroscopy(j.at("spectroscopy"), cfg.spectroscopy);
  if (top.has("stability")) read_stability(j.at("stability"), cfg.stability);
  if (top.has("rabi")) read_rabi(j.at("rabi"), cfg.rabi);
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace sps
