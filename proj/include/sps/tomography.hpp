#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sps/density_matrix.hpp"

namespace sps {

class UndefinedValueError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Moments tr(rho (a^dag)^n a^k) with truncated ladder operators; zero error bars.
MomentSet moments_from_rho(const DensityMatrix& rho, int max_order = kMaxMomentOrder);

struct MleOptions {
  int restarts = 8;
  std::uint64_t seed = 11;
  double sigma_floor = 1e-6;
  double gradient_tol = 1e-9;
};

struct MleResult {
  DensityMatrix state;
  double chi_square = 0.0;
  double gradient_norm = 0.0;
  int best_restart = 0;
  bool converged = false;
};

/// Gaussian-in-moments maximum likelihood over rho = T^dag T / tr(T^dag T),
/// T lower triangular with real diagonal. Restart 0 starts from the maximally
/// mixed state, the others from seeded random T; the lowest chi-square wins,
/// ties going to the lowest restart index.
MleResult mle_density_matrix(const MomentSet& moments, const MleOptions& options = {});

struct G2Result {
  double value = 0.0;
  double error = 0.0;
};

/// <(a^dag)^2 a^2> / <a^dag a>^2 with first-order error propagation (including
/// the m11-m22 covariance). Throws UndefinedValueError if <a^dag a> <= 0.
G2Result g2_zero(const MomentSet& moments);

struct WignerValue {
  double value = 0.0;
  bool truncation_warning = false;  ///< |alpha| > 2
};

/// W(alpha) = (2/pi) Tr[D(alpha) rho D^dag(alpha) Pi], D by matrix exponential
/// in an enlarged Fock space.
WignerValue wigner(const DensityMatrix& rho, std::complex<double> alpha);

struct WignerSample {
  double re = 0.0;
  double im = 0.0;
  double w = 0.0;
};

/// Square grid over [-extent, extent]^2 with n points per side.
std::vector<WignerSample> wigner_grid(const DensityMatrix& rho, double extent, int n);

void write_wigner_csv(const std::string& path, const std::vector<WignerSample>& grid);

}  // namespace sps
