#include "sps/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "sps/optimize.hpp"

namespace sps {
namespace {

using cd = std::complex<double>;

Matrix3c moment_operator(int n, int k) {
  const Matrix3c a = lowering_operator();
  Matrix3c op = Matrix3c::Identity();
  for (int i = 0; i < n; ++i) op = op * a.adjoint();
  for (int i = 0; i < k; ++i) op = op * a;
  return op;
}

std::vector<std::pair<int, int>> fitted_pairs() {
  std::vector<std::pair<int, int>> pairs;
  for (int n = 0; n <= 4; ++n)
    for (int k = n; n + k <= 4; ++k)
      if (n + k > 0) pairs.emplace_back(n, k);
  return pairs;
}

// Parameter layout: T00, T11, T22, Re/Im T10, Re/Im T20, Re/Im T21.
Matrix3c unpack(const Eigen::VectorXd& x) {
  Matrix3c t = Matrix3c::Zero();
  t(0, 0) = x[0];
  t(1, 1) = x[1];
  t(2, 2) = x[2];
  t(1, 0) = cd(x[3], x[4]);
  t(2, 0) = cd(x[5], x[6]);
  t(2, 1) = cd(x[7], x[8]);
  return t;
}

Matrix3c basis(int j) {
  static const std::pair<int, int> pos[9] = {{0, 0}, {1, 1}, {2, 2}, {1, 0}, {1, 0},
                                             {2, 0}, {2, 0}, {2, 1}, {2, 1}};
  Matrix3c e = Matrix3c::Zero();
  e(pos[j].first, pos[j].second) = (j >= 3 && j % 2 == 0) ? cd(0.0, 1.0) : cd(1.0, 0.0);
  return e;
}

struct MleProblem {
  std::vector<std::pair<int, int>> pairs = fitted_pairs();
  std::vector<Matrix3c> ops;
  std::vector<cd> target;
  std::vector<double> weight;
  int n_res = 0;

  MleProblem(const MomentSet& m, double floor) {
    for (auto [n, k] : pairs) {
      ops.push_back(moment_operator(n, k));
      target.push_back(m.m(n, k));
      weight.push_back(1.0 / std::max(m.sigma(n, k), floor));
      n_res += n == k ? 1 : 2;
    }
  }

  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    const Matrix3c t = unpack(x);
    const Matrix3c a = t.adjoint() * t;
    const Matrix3c rho = a / a.trace().real();
    r.resize(n_res);
    int i = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const cd d = ((rho * ops[p]).trace() - target[p]) * weight[p];
      r[i++] = d.real();
      if (pairs[p].first != pairs[p].second) r[i++] = d.imag();
    }
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    const Matrix3c t = unpack(x);
    const Matrix3c a = t.adjoint() * t;
    const double tr = a.trace().real();
    jac.resize(n_res, 9);
    for (int j = 0; j < 9; ++j) {
      const Matrix3c e = basis(j);
      const Matrix3c da = e.adjoint() * t + t.adjoint() * e;
      const Matrix3c drho = da / tr - a * (da.trace().real() / (tr * tr));
      int i = 0;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const cd d = (drho * ops[p]).trace() * weight[p];
        jac(i++, j) = d.real();
        if (pairs[p].first != pairs[p].second) jac(i++, j) = d.imag();
      }
    }
  }
};

}  // namespace

MomentSet moments_from_rho(const DensityMatrix& rho, int max_order) {
  if (max_order < 1 || max_order > kMaxMomentOrder) {
    throw std::invalid_argument("moments_from_rho: max_order must be in [1, 4]");
  }
  MomentSet out;
  for (int n = 0; n <= 4; ++n)
    for (int k = 0; n + k <= max_order; ++k) out.m(n, k) = (rho.rho * moment_operator(n, k)).trace();
  return out;
}

MleResult mle_density_matrix(const MomentSet& moments, const MleOptions& options) {
  if (!moments.m.allFinite() || !moments.sigma.allFinite()) {
    throw std::invalid_argument("mle_density_matrix: non-finite moments or error bars");
  }
  const MleProblem prob(moments, options.sigma_floor);
  const ResidualFn res = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) { prob.residual(x, r); };
  const JacobianFn jac = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) { prob.jacobian(x, j); };

  std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                    static_cast<std::uint32_t>(options.seed >> 32), 0x6d6c65u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  MleResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  LeastSquaresOptions lso;
  lso.xtol = 1e-14;
  lso.ftol = 0.0;
  lso.max_evaluations = 5000;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(9);
    if (r == 0) {
      x0.head(3).setConstant(1.0);
    } else {
      for (int j = 0; j < 9; ++j) x0[j] = normal(rng);
      x0.head(3) = x0.head(3).cwiseAbs();
    }
    LeastSquaresResult fit = least_squares(res, x0, prob.n_res, jac, lso);
    // Near the cost floor LM cannot see further decrease; Gauss-Newton steps
    // judged on the gradient itself finish the job.
    Eigen::VectorXd x = fit.x, rv;
    Eigen::MatrixXd jm;
    res(x, rv);
    jac(x, jm);
    double gnorm = (jm.transpose() * rv).norm();
    for (int it = 0; it < 30 && gnorm >= options.gradient_tol; ++it) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(jm, Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(1e-11);  // drops the trace-scale direction and near-null modes
      const Eigen::VectorXd step = svd.solve(rv);
      Eigen::VectorXd xn = x - step, rn;
      Eigen::MatrixXd jn;
      res(xn, rn);
      jac(xn, jn);
      const double gn = (jn.transpose() * rn).norm();
      if (!(gn < gnorm) || 0.5 * rn.squaredNorm() > fit.cost * (1.0 + 1e-12)) break;
      x = xn;
      rv = rn;
      jm = jn;
      gnorm = gn;
    }
    fit.x = x;
    fit.residual = rv;
    fit.jacobian = jm;
    fit.cost = 0.5 * rv.squaredNorm();
    if (fit.cost < best_cost * (1.0 - 1e-12)) {
      best_cost = fit.cost;
      const Matrix3c t = unpack(fit.x);
      const Matrix3c a = t.adjoint() * t;
      best.state = DensityMatrix(a / a.trace().real());
      best.chi_square = 2.0 * fit.cost;
      best.gradient_norm = (fit.jacobian.transpose() * fit.residual).norm();
      best.best_restart = r;
    }
  }
  best.state.rho = 0.5 * (best.state.rho + best.state.rho.adjoint()).eval();
  best.converged = best.gradient_norm < options.gradient_tol;
  return best;
}

G2Result g2_zero(const MomentSet& moments) {
  const double n1 = moments.m(1, 1).real();
  const double n2 = moments.m(2, 2).real();
  if (!(n1 > 0.0)) throw UndefinedValueError("g2_zero: <a^dag a> must be > 0");
  const double s1 = moments.sigma(1, 1);
  const double s2 = moments.sigma(2, 2);
  G2Result g;
  g.value = n2 / (n1 * n1);
  const double d2 = 1.0 / (n1 * n1);
  const double d1 = -2.0 * n2 / (n1 * n1 * n1);
  const double var = d2 * d2 * s2 * s2 + d1 * d1 * s1 * s1 + 2.0 * d1 * d2 * moments.cov_11_22;
  g.error = std::sqrt(std::max(var, 0.0));
  return g;
}

WignerValue wigner(const DensityMatrix& rho, std::complex<double> alpha) {
  // the displaced state spreads over about |alpha|^2 +- 2|alpha| levels
  const double r = std::abs(alpha);
  const int kWork = std::max(40, static_cast<int>(std::ceil(r * r + 8.0 * r + 20.0)));
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(kWork, kWork);
  for (int n = 1; n < kWork; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXcd gen = alpha * a.adjoint() - std::conj(alpha) * a;
  const Eigen::MatrixXcd d = gen.exp();
  const Eigen::MatrixXcd d3 = d.leftCols(kFockDim);
  const Eigen::MatrixXcd displaced = d3 * rho.rho * d3.adjoint();
  cd tr = 0.0;
  for (int n = 0; n < kWork; ++n) tr += (n % 2 == 0 ? 1.0 : -1.0) * displaced(n, n);
  const cd w = tr * (2.0 / std::numbers::pi);
  if (std::abs(w.imag()) > 1e-9) throw std::logic_error("wigner: imaginary residue above 1e-9");
  return {w.real(), std::abs(alpha) > 2.0};
}

std::vector<WignerSample> wigner_grid(const DensityMatrix& rho, double extent, int n) {
  if (n < 2 || !(extent > 0.0)) throw std::invalid_argument("wigner_grid: need n >= 2, extent > 0");
  std::vector<WignerSample> out;
  out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  const double step = 2.0 * extent / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double re = -extent + step * i;
      const double im = -extent + step * j;
      out.push_back({re, im, wigner(rho, {re, im}).value});
    }
  }
  return out;
}

void write_wigner_csv(const std::string& path, const std::vector<WignerSample>& grid) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "# sps wigner v1\n";
  os << "re_alpha,im_alpha,w\n";
  char buf[120];
  for (const auto& s : grid) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.10e\n", s.re, s.im, s.w);
    os << buf;
  }
}

}  // namespace sps
