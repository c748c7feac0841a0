#pragma once

#include <cmath>
#include <random>

#include "ifepanel/fit.hpp"
#include "ifepanel/panel.hpp"

namespace ifepanel {

struct Rank1Options {
  double tol = 1e-12;       // relative change of the leading eigenvalue estimate
  int max_sweeps = 0;       // 0: ceil(10 log(NT)), floored at 30
  unsigned long long seed = 12345;
};

struct Rank1Fit {
  VectorXd alpha;  // N
  VectorXd gamma;  // T
  double sse = 0.0;
  int iterations = 0;
  bool ambiguous = false;  // top two singular values within tolerance of each other
};

// Leading singular triple of Y by power iteration on YY', scaled so that
// alpha gamma' is the best rank-1 approximation and sum alpha^2 = sum gamma^2.
inline Rank1Fit rank1_fit(const PanelMat& y, const Rank1Options& opt = {}) {
  const int n = static_cast<int>(y.rows());
  const int t = static_cast<int>(y.cols());
  if (y.norm() == 0.0) throw argument_error("rank1_fit: zero matrix");
  int max_sweeps = opt.max_sweeps > 0
                       ? opt.max_sweeps
                       : std::max(30, static_cast<int>(std::ceil(10.0 * std::log(double(n) * t))));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd u = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return normal(rng); });
  u.normalize();

  MatrixXd yyt = y * y.transpose();
  double lambda = 0.0;
  int it = 0;
  for (; it < max_sweeps; ++it) {
    VectorXd w = yyt * u;
    double nl = w.norm();
    if (nl == 0.0) break;
    w /= nl;
    double change = std::abs(nl - lambda) / std::max(1.0, nl);
    u = w;
    lambda = nl;
    if (change < opt.tol && it > 0) break;
  }
  double sigma1 = std::sqrt(std::max(0.0, u.dot(yyt * u)));
  VectorXd v = y.transpose() * u;
  if (sigma1 > 0.0) v /= sigma1;

  Rank1Fit fit;
  double root = std::sqrt(sigma1);
  fit.alpha = root * u;
  fit.gamma = root * v;
  if (fit.gamma.sum() < 0.0) {
    fit.alpha = -fit.alpha;
    fit.gamma = -fit.gamma;
  }
  fit.sse = (y - fit.alpha * fit.gamma.transpose()).squaredNorm();
  fit.iterations = it;

  // cheap second-singular-value probe on the deflated matrix
  {
    MatrixXd defl = yyt - sigma1 * sigma1 * u * u.transpose();
    VectorXd w = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return normal(rng); });
    w -= u * u.dot(w);
    if (w.norm() > 0.0) {
      w.normalize();
      for (int s = 0; s < 50; ++s) {
        w = defl * w;
        w -= u * u.dot(w);
        double nw = w.norm();
        if (nw == 0.0) break;
        w /= nw;
      }
      double sigma2 = std::sqrt(std::max(0.0, w.dot(yyt * w)));
      if (sigma1 > 0.0 && (sigma1 - sigma2) / sigma1 < 1e-6) fit.ambiguous = true;
    }
  }
  return fit;
}

struct OracleComparison {
  double max_product_gap = 0.0;  // max |alpha_i gamma_t (ife) - alpha_i gamma_t (pca)|
  double delta_gap = 0.0;        // |variance APE (ife) - variance APE (pca)|
  double delta_ife = 0.0;
  double delta_pca = 0.0;
  bool ambiguous = false;
};

// K = 0 Gaussian model: the alternating estimator and the principal-components
// factorization must agree on the fitted interaction and the variance APE.
inline OracleComparison compare_with_ife(const Panel& p, double sigma, FitOptions opt = {},
                                         Rank1Options r1 = {}) {
  if (p.n_regressors() != 0)
    throw argument_error("compare_with_ife expects a K = 0 panel");
  opt.tol = std::min(opt.tol, 1e-12);
  opt.stationarity_tol = std::min(opt.stationarity_tol, 1e-9);
  r1.tol = std::min(r1.tol, 1e-13);
  r1.max_sweeps = std::max(r1.max_sweeps, 400);

  FitResult ife = fit_ife(p, IndexFamily::linear(sigma), opt);
  Rank1Fit pca = rank1_fit(p.y, r1);

  const double nt = static_cast<double>(p.n_units()) * p.n_periods();
  OracleComparison out;
  MatrixXd prod_ife = ife.params.alpha * ife.params.gamma.transpose();
  MatrixXd prod_pca = pca.alpha * pca.gamma.transpose();
  out.max_product_gap = (prod_ife - prod_pca).cwiseAbs().maxCoeff();
  out.delta_ife = (p.y - prod_ife).squaredNorm() / nt;
  out.delta_pca = pca.sse / nt;
  out.delta_gap = std::abs(out.delta_ife - out.delta_pca);
  out.ambiguous = pca.ambiguous;
  return out;
}

}  // namespace ifepanel
