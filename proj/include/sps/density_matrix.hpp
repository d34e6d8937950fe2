#pragma once

#include <complex>

#include <Eigen/Dense>

namespace sps {

inline constexpr int kFockDim = 3;
inline constexpr int kMaxMomentOrder = 4;

using Matrix3c = Eigen::Matrix<std::complex<double>, kFockDim, kFockDim>;

/// Truncated-Fock state on |0>, |1>, |2>.
struct DensityMatrix {
  Matrix3c rho = Matrix3c::Zero();

  DensityMatrix() { rho(0, 0) = 1.0; }
  explicit DensityMatrix(const Matrix3c& m) : rho(m) {}

  static DensityMatrix fock(int n);
  static DensityMatrix pure(const Eigen::Vector3cd& psi);

  /// Throws std::invalid_argument when not Hermitian, not unit trace
  /// (1e-10) or has an eigenvalue below -1e-10.
  void validate() const;
  bool is_valid(double tol = 1e-10) const;

  /// Nearest unit-trace PSD matrix (negative eigenvalues dropped).
  DensityMatrix projected() const;
};

/// Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2.
double fidelity(const DensityMatrix& a, const DensityMatrix& b);

/// Truncated annihilation operator on the Fock basis.
Matrix3c lowering_operator();

/// Normally ordered field moments m(n, k) = <(a^dag)^n a^k>, n + k <= 4.
struct MomentSet {
  Eigen::Matrix<std::complex<double>, 5, 5> m = Eigen::Matrix<std::complex<double>, 5, 5>::Zero();
  /// Standard error per moment, sqrt(var Re + var Im).
  Eigen::Matrix<double, 5, 5> sigma = Eigen::Matrix<double, 5, 5>::Zero();
  double cov_11_22 = 0.0;  ///< covariance of Re m(1,1) and Re m(2,2)
  long n_shots = 0;
  bool insufficient_shots = false;
  bool nonphysical = false;

  std::complex<double> operator()(int n, int k) const { return m(n, k); }
  std::complex<double> mean_field() const { return m(0, 1); }
  double photon_number() const { return m(1, 1).real(); }
  double second_order() const { return m(2, 2).real(); }
};

}  // namespace sps
