#pragma once

#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sps {

using cd = std::complex<double>;

/// Raised when two sampled objects do not share a grid, or a file does not
/// match its documented layout.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniformly sampled complex amplitude. In field form |a|^2 is a photon flux
/// (photons/s); the same container carries voltages where noted.
struct ComplexEnvelope {
  double dt = 0.0;
  double t0 = 0.0;
  double carrier_detuning = 0.0;  ///< Hz, carrier offset from the frame
  Eigen::VectorXcd samples;

  ComplexEnvelope() = default;
  ComplexEnvelope(double dt_, Eigen::VectorXcd samples_, double t0_ = 0.0,
                  double carrier_detuning_ = 0.0);

  static ComplexEnvelope zeros(double dt, Eigen::Index n, double t0 = 0.0);

  Eigen::Index size() const { return samples.size(); }
  double time(Eigen::Index i) const { return t0 + static_cast<double>(i) * dt; }
  double t_end() const { return time(size() - 1); }
  double duration() const { return size() > 1 ? dt * static_cast<double>(size() - 1) : 0.0; }

  /// Linear interpolation; zero outside the sampled span.
  cd at(double t) const;

  /// Exact integral of |a(t)|^2 for the piecewise-linear interpolant.
  double energy() const;

  bool same_grid(const ComplexEnvelope& other, double rel_tol = 1e-9) const;

  /// Throws std::invalid_argument if dt <= 0 or a sample is not finite.
  void validate() const;
};

ComplexEnvelope operator+(const ComplexEnvelope& a, const ComplexEnvelope& b);
ComplexEnvelope operator*(cd scale, const ComplexEnvelope& a);

/// Writes `t,re,im` rows after a `#` header carrying dt, t0, the carrier
/// detuning and the amplitude units.
void write_envelope_csv(std::ostream& os, const ComplexEnvelope& env,
                        const std::string& units = "sqrt(photons/s)");
void write_envelope_csv(const std::string& path, const ComplexEnvelope& env,
                        const std::string& units = "sqrt(photons/s)");

/// Reads the format produced by write_envelope_csv. Throws FormatError.
ComplexEnvelope read_envelope_csv(std::istream& is);
ComplexEnvelope read_envelope_csv(const std::string& path);

}  // namespace sps
