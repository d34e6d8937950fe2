#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sps/optimize.hpp"

using namespace sps;

TEST(optimize, straight_line_fit_matches_normal_equations) {
  const int n = 30;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.1);
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = i * 0.1;
    y[i] = 1.5 - 0.7 * x[i] + g(rng);
  }
  const ResidualFn res = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) { r = (p[0] + p[1] * x.array() - y.array()).matrix(); };
  const LeastSquaresResult fit = least_squares(res, Eigen::Vector2d(0, 0), n);

  Eigen::MatrixXd a(n, 2);
  a.col(0).setOnes();
  a.col(1) = x;
  const Eigen::Vector2d beta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  const double s2 = (a * beta - y).squaredNorm() / (n - 2);
  const Eigen::Matrix2d cov = (a.transpose() * a).inverse() * s2;
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.x[0], beta[0], 1e-8);
  EXPECT_NEAR(fit.x[1], beta[1], 1e-8);
  EXPECT_NEAR(fit.covariance(0, 0), cov(0, 0), 1e-6 * cov(0, 0));
  EXPECT_NEAR(fit.covariance(0, 1), cov(0, 1), 1e-6 * std::abs(cov(0, 1)));
}

TEST(optimize, exponential_fit_with_analytic_jacobian) {
  const int n = 50;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, 5.0);
  const ResidualFn res = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r = (p[0] * (-p[1] * t.array()).exp() - 2.0 * (-0.8 * t.array()).exp()).matrix();
  };
  const JacobianFn jac = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& j) {
    j.resize(n, 2);
    j.col(0) = (-p[1] * t.array()).exp().matrix();
    j.col(1) = (-p[0] * t.array() * (-p[1] * t.array()).exp()).matrix();
  };
  const LeastSquaresResult fit = least_squares(res, Eigen::Vector2d(1.0, 0.3), n, jac);
  EXPECT_NEAR(fit.x[0], 2.0, 1e-9);
  EXPECT_NEAR(fit.x[1], 0.8, 1e-9);
  const Eigen::MatrixXd num = numeric_jacobian(res, fit.x, n);
  EXPECT_LT((num - fit.jacobian).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(optimize, redundant_parameters_are_flagged) {
  const ResidualFn res = [](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    r.resize(4);
    for (int i = 0; i < 4; ++i) r[i] = (p[0] + p[1]) * i - 3.0 * i;
  };
  const LeastSquaresResult fit = least_squares(res, Eigen::Vector2d(0.5, 0.5), 4);
  EXPECT_TRUE(fit.rank_deficient);
  EXPECT_NEAR(fit.x[0] + fit.x[1], 3.0, 1e-9);
}

TEST(optimize, simplex_finds_quadratic_minimum) {
  auto f = [](const Eigen::VectorXd& x) {
    return 1.0 + (x[0] - 1.0) * (x[0] - 1.0) + 10.0 * (x[1] + 2.0) * (x[1] + 2.0) + 3.0 * x[2] * x[2];
  };
  SimplexOptions opt;
  opt.max_iterations = 2000;
  opt.rel_tol = 1e-14;
  const SimplexResult r = nelder_mead(f, Eigen::Vector3d(0.0, 0.0, 1.0), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], -2.0, 1e-5);
  EXPECT_NEAR(r.x[2], 0.0, 1e-5);
}

TEST(optimize, simplex_reports_iteration_budget) {
  auto rosen = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  SimplexOptions opt;
  opt.max_iterations = 10;
  const SimplexResult r = nelder_mead(rosen, Eigen::Vector2d(-1.2, 1.0), opt);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 10);
  EXPECT_LE(r.value, rosen(Eigen::Vector2d(-1.2, 1.0)));
}
