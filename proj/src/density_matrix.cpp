#include "sps/density_matrix.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace sps {

DensityMatrix DensityMatrix::fock(int n) {
  if (n < 0 || n >= kFockDim) throw std::out_of_range("DensityMatrix::fock: level out of range");
  Matrix3c m = Matrix3c::Zero();
  m(n, n) = 1.0;
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::pure(const Eigen::Vector3cd& psi) {
  const Eigen::Vector3cd v = psi.normalized();
  return DensityMatrix(v * v.adjoint());
}

bool DensityMatrix::is_valid(double tol) const {
  if (!rho.allFinite()) return false;
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rho.trace() - 1.0) > tol) return false;
  Eigen::SelfAdjointEigenSolver<Matrix3c> es(rho);
  return es.eigenvalues().minCoeff() >= -tol;
}

void DensityMatrix::validate() const {
  if (!is_valid()) throw std::invalid_argument("DensityMatrix: not a valid density matrix");
}

DensityMatrix DensityMatrix::projected() const {
  const Matrix3c h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix3c> es(h);
  Eigen::Vector3d w = es.eigenvalues().cwiseMax(0.0);
  if (w.sum() <= 0.0) return DensityMatrix();
  w /= w.sum();
  return DensityMatrix(es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint());
}

double fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix3c> ea(0.5 * (a.rho + a.rho.adjoint()));
  const Eigen::Vector3d wa = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix3c sa = ea.eigenvectors() * wa.asDiagonal() * ea.eigenvectors().adjoint();
  const Matrix3c inner = sa * b.rho * sa;
  Eigen::SelfAdjointEigenSolver<Matrix3c> ei(0.5 * (inner + inner.adjoint()));
  const double tr = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return tr * tr;
}

Matrix3c lowering_operator() {
  Matrix3c a = Matrix3c::Zero();
  for (int n = 1; n < kFockDim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

}  // namespace sps
