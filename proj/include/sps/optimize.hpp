#pragma once

#include <functional>

#include <Eigen/Dense>

namespace sps {

using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;
using JacobianFn = std::function<void(const Eigen::VectorXd& x, Eigen::MatrixXd& jac)>;

struct LeastSquaresOptions {
  double xtol = 1e-10;
  double ftol = 1e-12;
  int max_evaluations = 4000;
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  /// (J^T J)^-1, pseudo-inverse when singular.
  Eigen::MatrixXd inverse_hessian;
  /// inverse_hessian scaled by the reduced chi-square s^2 = |r|^2 / (m - n).
  Eigen::MatrixXd covariance;
  double cost = 0.0;  ///< |r|^2 / 2
  int evaluations = 0;
  int status = 0;
  bool converged = false;
  bool rank_deficient = false;

  Eigen::VectorXd errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Levenberg-Marquardt (MINPACK variant from Eigen). When `jacobian` is empty a
/// central-difference Jacobian is used.
LeastSquaresResult least_squares(const ResidualFn& residual, Eigen::VectorXd x0, int n_residuals,
                                 const JacobianFn& jacobian = {},
                                 const LeastSquaresOptions& options = {});

/// Central-difference Jacobian with step 1e-6 * max(|x_j|, scale_j).
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                 int n_residuals, const Eigen::VectorXd& scale = {});

struct SimplexOptions {
  Eigen::VectorXd initial_step;  ///< per-coordinate; defaults to 5% of |x0| (or 1e-3)
  int max_iterations = 500;
  double rel_tol = 1e-10;
  double abs_tol = 1e-300;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead with standard coefficients. Stops when the spread of vertex
/// values falls below rel_tol * |best| + abs_tol, or after max_iterations.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const SimplexOptions& options = {});

}  // namespace sps
