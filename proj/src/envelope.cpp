#include "sps/envelope.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace sps {

ComplexEnvelope::ComplexEnvelope(double dt_, Eigen::VectorXcd samples_, double t0_,
                                 double carrier_detuning_)
    : dt(dt_), t0(t0_), carrier_detuning(carrier_detuning_), samples(std::move(samples_)) {}

ComplexEnvelope ComplexEnvelope::zeros(double dt, Eigen::Index n, double t0) {
  return ComplexEnvelope(dt, Eigen::VectorXcd::Zero(n), t0);
}

cd ComplexEnvelope::at(double t) const {
  if (size() == 0) return {};
  const double x = (t - t0) / dt;
  if (x < 0.0 || x > static_cast<double>(size() - 1)) return {};
  const auto i = static_cast<Eigen::Index>(std::floor(x));
  if (i >= size() - 1) return samples[size() - 1];
  const double w = x - static_cast<double>(i);
  return (1.0 - w) * samples[i] + w * samples[i + 1];
}

double ComplexEnvelope::energy() const {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < size(); ++i) {
    const cd a = samples[i];
    const cd b = samples[i + 1];
    total += std::norm(a) + std::real(a * std::conj(b)) + std::norm(b);
  }
  return total * dt / 3.0;
}

bool ComplexEnvelope::same_grid(const ComplexEnvelope& other, double rel_tol) const {
  return size() == other.size() && std::abs(dt - other.dt) <= rel_tol * dt &&
         std::abs(t0 - other.t0) <= rel_tol * dt;
}

void ComplexEnvelope::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("ComplexEnvelope: dt must be > 0");
  if (!samples.allFinite()) throw std::invalid_argument("ComplexEnvelope: non-finite sample");
}

ComplexEnvelope operator+(const ComplexEnvelope& a, const ComplexEnvelope& b) {
  if (!a.same_grid(b)) throw FormatError("envelope sum: grids differ");
  ComplexEnvelope out = a;
  out.samples += b.samples;
  return out;
}

ComplexEnvelope operator*(cd scale, const ComplexEnvelope& a) {
  ComplexEnvelope out = a;
  out.samples *= scale;
  return out;
}

void write_envelope_csv(std::ostream& os, const ComplexEnvelope& env, const std::string& units) {
  char buf[160];
  os << "# sps envelope v1\n";
  std::snprintf(buf, sizeof buf, "# dt=%.17g s; t0=%.17g s; carrier_detuning=%.17g Hz; units=",
                env.dt, env.t0, env.carrier_detuning);
  os << buf << units << "\n";
  os << "t,re,im\n";
  for (Eigen::Index i = 0; i < env.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12e,%.12e,%.12e\n", env.time(i), env.samples[i].real(),
                  env.samples[i].imag());
    os << buf;
  }
}

void write_envelope_csv(const std::string& path, const ComplexEnvelope& env,
                        const std::string& units) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_envelope_csv(os, env, units);
}

namespace {

double header_value(const std::string& line, const std::string& key) {
  const auto pos = line.find(key + "=");
  if (pos == std::string::npos) throw FormatError("envelope csv: header lacks " + key);
  return std::stod(line.substr(pos + key.size() + 1));
}

}  // namespace

ComplexEnvelope read_envelope_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# sps envelope", 0) != 0) {
    throw FormatError("envelope csv: missing magic line");
  }
  if (!std::getline(is, line) || line.empty() || line[0] != '#') {
    throw FormatError("envelope csv: missing grid header");
  }
  ComplexEnvelope env;
  try {
    env.dt = header_value(line, "dt");
    env.t0 = header_value(line, "t0");
    env.carrier_detuning = header_value(line, "carrier_detuning");
  } catch (const std::invalid_argument&) {
    throw FormatError("envelope csv: unparsable header");
  }
  if (!std::getline(is, line) || line != "t,re,im") {
    throw FormatError("envelope csv: expected column header t,re,im");
  }
  std::vector<cd> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double t = 0, re = 0, im = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &re, &im) != 3) {
      throw FormatError("envelope csv: bad row '" + line + "'");
    }
    values.emplace_back(re, im);
  }
  env.samples = Eigen::Map<Eigen::VectorXcd>(values.data(), static_cast<Eigen::Index>(values.size()));
  env.validate();
  return env;
}

ComplexEnvelope read_envelope_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_envelope_csv(is);
}

}  // namespace sps
