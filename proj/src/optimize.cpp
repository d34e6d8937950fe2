#include "sps/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace sps {
namespace {

struct Functor : Eigen::DenseFunctor<double> {
  const ResidualFn& residual;
  const JacobianFn& jacobian;
  int evaluations = 0;

  Functor(const ResidualFn& r, const JacobianFn& j, int inputs, int values)
      : Eigen::DenseFunctor<double>(inputs, values), residual(r), jacobian(j) {}

  int operator()(const InputType& x, ValueType& fvec) {
    ++evaluations;
    residual(x, fvec);
    return 0;
  }

  int df(const InputType& x, JacobianType& fjac) {
    if (jacobian) {
      jacobian(x, fjac);
    } else {
      fjac = numeric_jacobian(residual, x, values());
      evaluations += 2 * inputs();
    }
    return 0;
  }
};

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                 int n_residuals, const Eigen::VectorXd& scale) {
  Eigen::MatrixXd jac(n_residuals, x.size());
  Eigen::VectorXd rp(n_residuals), rm(n_residuals);
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double s = scale.size() == x.size() ? scale[j] : 1.0;
    const double h = 1e-6 * std::max(std::abs(x[j]), s);
    xp[j] = x[j] + h;
    residual(xp, rp);
    xp[j] = x[j] - h;
    residual(xp, rm);
    xp[j] = x[j];
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LeastSquaresResult least_squares(const ResidualFn& residual, Eigen::VectorXd x0, int n_residuals,
                                 const JacobianFn& jacobian, const LeastSquaresOptions& options) {
  const int n = static_cast<int>(x0.size());
  Functor functor(residual, jacobian, n, n_residuals);
  Eigen::LevenbergMarquardt<Functor> lm(functor);
  lm.setXtol(options.xtol);
  lm.setFtol(options.ftol);
  lm.setMaxfev(options.max_evaluations);
  const auto status = lm.minimize(x0);

  LeastSquaresResult out;
  out.x = x0;
  out.status = static_cast<int>(status);
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  out.residual.resize(n_residuals);
  residual(out.x, out.residual);
  if (jacobian) {
    out.jacobian.resize(n_residuals, n);
    jacobian(out.x, out.jacobian);
  } else {
    out.jacobian = numeric_jacobian(residual, out.x, n_residuals);
  }
  out.evaluations = functor.evaluations;
  out.cost = 0.5 * out.residual.squaredNorm();

  const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jtj);
  out.rank_deficient = cod.rank() < n;
  out.inverse_hessian = cod.pseudoInverse();
  const int dof = std::max(1, n_residuals - n);
  out.covariance = out.inverse_hessian * (out.residual.squaredNorm() / dof);
  return out;
}

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                          const Eigen::VectorXd& x0, const SimplexOptions& options) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    double step = options.initial_step.size() == n ? options.initial_step[j]
                                                   : (x0[j] != 0.0 ? 0.05 * std::abs(x0[j]) : 1e-3);
    pts[j + 1][j] += step;
  }
  for (Eigen::Index i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  std::vector<Eigen::Index> order(n + 1);
  SimplexResult res;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return vals[a] < vals[b]; });
    const Eigen::Index best = order.front();
    const Eigen::Index worst = order.back();
    const Eigen::Index second = order[n - 1];
    if (vals[worst] - vals[best] <= options.rel_tol * std::abs(vals[best]) + options.abs_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = f(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace sps
