#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "ifepanel/families.hpp"
#include "ifepanel/panel.hpp"

namespace ifepanel {

struct Params {
  VectorXd beta;   // K
  VectorXd alpha;  // N
  VectorXd gamma;  // T

  double index(const Panel& p, int i, int t) const {
    double z = alpha[i] * gamma[t];
    for (int k = 0; k < static_cast<int>(p.x.size()); ++k) z += beta[k] * p.x[k](i, t);
    return z;
  }
};

struct FitOptions {
  double tol = 1e-8;               // objective-increase stopping rule
  int max_outer_iters = 1000;
  double newton_tol = 1e-10;       // inner gradient tolerance
  double damping = 0.5;            // backtracking contraction factor
  double stationarity_tol = 1e-7;  // sup-norm of the scaled gradient at exit
  int random_restarts = 0;
  unsigned long long restart_seed = 1;
};

struct FitResult {
  Params params;
  double loglik = 0.0;  // (NT)^{-1/2} sum of log-likelihoods
  int outer_iterations = 0;
  std::vector<double> objective_trace;
  bool converged = false;
  double grad_supnorm = 0.0;  // scale direction projected out
};

inline double objective(const Panel& p, const IndexFamily& family, const Params& params) {
  const int n = p.n_units(), t = p.n_periods();
  if (params.alpha.size() != n || params.gamma.size() != t ||
      params.beta.size() != p.n_regressors())
    throw argument_error("objective: parameter dimensions do not match panel");
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) s += family.loglik(p.y(i, j), params.index(p, i, j));
  return s / std::sqrt(static_cast<double>(n) * t);
}

namespace detail {

// Safeguarded 1-D Newton ascent of a strictly concave function.  eval(c, g, h)
// returns the value and writes gradient/negative-curvature-free hessian.
template <class Eval>
double maximize_concave_1d(const Eval& eval, double c0, double grad_tol, double damping,
                           int max_iter, const char* what) {
  double c = c0, g = 0.0, h = 0.0;
  double v = eval(c, g, h);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(g) < grad_tol) return c;
    if (g > 0.0) lo = std::max(lo, c); else hi = std::min(hi, c);
    double step;
    if (std::isfinite(h) && h < 0.0) {
      step = -g / h;
    } else {
      step = g > 0.0 ? 1.0 : -1.0;  // concavity broken numerically; probe
    }
    if (!std::isfinite(step)) step = g > 0.0 ? 1.0 : -1.0;
    double cn = c + step;
    // keep inside the sign-change bracket when one is known
    if (cn <= lo || cn >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) cn = 0.5 * (lo + hi);
      else cn = c + step;  // one-sided: allow expansion
    }
    double gn = 0.0, hn = 0.0;
    double vn = eval(cn, gn, hn);
    int bt = 0;
    while (!(vn >= v) && bt < 60) {  // backtrack until no decrease
      cn = c + damping * (cn - c);
      vn = eval(cn, gn, hn);
      ++bt;
    }
    if (bt == 60 || !std::isfinite(vn)) throw convergence_error(std::string("1-d ascent stalled in ") + what);
    c = cn; v = vn; g = gn; h = hn;
  }
  if (std::abs(g) < 1e3 * grad_tol) return c;  // nearly there; accept
  throw convergence_error(std::string("1-d Newton did not converge in ") + what);
}

// Joint concave maximization over (beta, a) of sum_{i,t} l(y_it, x_it'beta + a_i f_t)
// with f fixed.  The negative Hessian is arrow-shaped: dense KxK in beta,
// diagonal in a, with KxN coupling; one Newton step costs O(NTK^2 + K^3).
inline std::pair<VectorXd, VectorXd> joint_newton(const Panel& p, const IndexFamily& family,
                                                  const VectorXd& f, VectorXd beta, VectorXd a,
                                                  const FitOptions& opt) {
  const int n = p.n_units(), t = p.n_periods(), K = p.n_regressors();
  if (f.size() != t) throw argument_error("joint_newton: fixed factor length mismatch");
  if (f.squaredNorm() < 1e-20) throw degenerate_factor_error("fixed factor is numerically zero");

  auto raw_objective = [&](const VectorXd& b, const VectorXd& av) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < t; ++j) {
        double z = av[i] * f[j];
        for (int k = 0; k < K; ++k) z += b[k] * p.x[k](i, j);
        s += family.loglik(p.y(i, j), z);
      }
    return s;
  };

  double v = raw_objective(beta, a);
  VectorXd gb(K), da(n), ga(n), haa(n);
  MatrixXd hbb(K, K), hba(K, n);
  for (int it = 0; it < 200; ++it) {
    gb.setZero(); ga.setZero(); haa.setZero();
    hbb.setZero(); hba.setZero();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < t; ++j) {
        double z = a[i] * f[j];
        for (int k = 0; k < K; ++k) z += beta[k] * p.x[k](i, j);
        DerivativeBundle d = family.derivatives(p.y(i, j), z, 2);
        double hw = -d.d2;  // > 0 by concavity
        ga[i] += d.d1 * f[j];
        haa[i] += hw * f[j] * f[j];
        for (int k = 0; k < K; ++k) {
          double xk = p.x[k](i, j);
          gb[k] += d.d1 * xk;
          hba(k, i) += hw * f[j] * xk;
          for (int k2 = k; k2 < K; ++k2) hbb(k, k2) += hw * xk * p.x[k2](i, j);
        }
      }
    }
    double gsup = ga.size() ? ga.cwiseAbs().maxCoeff() : 0.0;
    if (K > 0) gsup = std::max(gsup, gb.cwiseAbs().maxCoeff());
    if (gsup < opt.newton_tol) return {beta, a};

    for (int k = 0; k < K; ++k)
      for (int k2 = 0; k2 < k; ++k2) hbb(k, k2) = hbb(k2, k);

    VectorXd db = VectorXd::Zero(K);
    // units with vanishing curvature (complete-separation drift) get a frozen,
    // gradient-proportional update instead of an exploding Newton step
    VectorXd haa_s = haa.cwiseMax(1e-14 * (1.0 + haa.maxCoeff()));
    if (K > 0) {
      MatrixXd schur = hbb;
      VectorXd rhs = gb;
      for (int i = 0; i < n; ++i) {
        schur.noalias() -= hba.col(i) * hba.col(i).transpose() / haa_s[i];
        rhs.noalias() -= hba.col(i) * (ga[i] / haa_s[i]);
      }
      Eigen::LLT<MatrixXd> llt(schur);
      if (llt.info() != Eigen::Success)
        throw noncolinearity_error(
            "singular beta block after eliminating the unit factors (generalized noncolinearity)");
      db = llt.solve(rhs);
    }
    for (int i = 0; i < n; ++i) da[i] = (ga[i] - hba.col(i).dot(db)) / haa_s[i];

    double step = 1.0;
    int bt = 0;
    double vn;
    VectorXd bn, an;
    for (;;) {
      bn = beta + step * db;
      an = a + step * da;
      vn = raw_objective(bn, an);
      if (vn >= v || bt >= 60) break;
      step *= opt.damping;
      ++bt;
    }
    if (bt >= 60 && vn < v) throw convergence_error("joint Newton stalled");
    beta = bn; a = an; v = vn;
  }
  throw convergence_error("joint Newton exceeded its iteration budget");
}

inline Panel transposed(const Panel& p) {
  Panel out;
  out.y = p.y.transpose();
  out.x.reserve(p.x.size());
  for (const auto& xk : p.x) out.x.emplace_back(xk.transpose());
  out.unit_labels.resize(out.y.rows());
  out.time_labels.resize(out.y.cols());
  for (int i = 0; i < static_cast<int>(out.unit_labels.size()); ++i)
    out.unit_labels[i] = "t" + std::to_string(i + 1);
  for (int t = 0; t < static_cast<int>(out.time_labels.size()); ++t) out.time_labels[t] = t + 1;
  return out;
}

}  // namespace detail

// Step 1 of the alternation: per-period concave maximization of gamma_t.
inline VectorXd profile_gamma(const Panel& p, const IndexFamily& family, const VectorXd& beta,
                              const VectorXd& alpha, const FitOptions& opt = {},
                              const VectorXd* warm = nullptr) {
  const int n = p.n_units(), t = p.n_periods(), K = p.n_regressors();
  if (alpha.size() != n) throw argument_error("profile_gamma: alpha length mismatch");
  if (alpha.squaredNorm() < 1e-20) throw degenerate_factor_error("profile_gamma: alpha is zero");
  VectorXd gamma(t);
  PanelMat base = PanelMat::Zero(n, t);
  for (int k = 0; k < K; ++k) base += beta[k] * p.x[k];
  for (int j = 0; j < t; ++j) {
    auto eval = [&](double c, double& g, double& h) {
      double v = 0.0;
      g = 0.0; h = 0.0;
      for (int i = 0; i < n; ++i) {
        DerivativeBundle d = family.derivatives(p.y(i, j), base(i, j) + alpha[i] * c, 2);
        v += d.value;
        g += d.d1 * alpha[i];
        h += d.d2 * alpha[i] * alpha[i];
      }
      return v;
    };
    double start = warm ? (*warm)[j] : 0.0;
    try {
      gamma[j] = detail::maximize_concave_1d(eval, start, opt.newton_tol, opt.damping, 200,
                                             "profile_gamma");
    } catch (const convergence_error& e) {
      throw convergence_error(std::string(e.what()) + " at period index " + std::to_string(j));
    }
  }
  return gamma;
}

// Step 2: joint concave maximization over (beta, alpha) given gamma.
inline std::pair<VectorXd, VectorXd> profile_beta_alpha(const Panel& p, const IndexFamily& family,
                                                        const VectorXd& gamma,
                                                        const VectorXd& init_beta,
                                                        const VectorXd& init_alpha,
                                                        const FitOptions& opt = {}) {
  if (gamma.size() != p.n_periods()) throw argument_error("profile_beta_alpha: gamma length mismatch");
  if (gamma.squaredNorm() < 1e-20) throw degenerate_factor_error("profile_beta_alpha: gamma is zero");
  return detail::joint_newton(p, family, gamma, init_beta, init_alpha, opt);
}

// Rescale (alpha, gamma) -> (c alpha, gamma / c) with c^4 = gamma'gamma / alpha'alpha,
// which equalizes the two squared norms and leaves every product alpha_i gamma_t fixed.
inline std::pair<VectorXd, VectorXd> rescale_normalize(const VectorXd& alpha, const VectorXd& gamma) {
  double na = alpha.squaredNorm(), ng = gamma.squaredNorm();
  if (na < 1e-20 || ng < 1e-20)
    throw degenerate_factor_error("rescale_normalize: zero-norm factor vector");
  double c = std::pow(ng / na, 0.25);
  return {c * alpha, gamma / c};
}

namespace detail {

// Scaled gradient of the objective with the scale direction v = (alpha, -gamma)
// projected out of the (alpha, gamma) block.
inline double gradient_supnorm(const Panel& p, const IndexFamily& family, const Params& q) {
  const int n = p.n_units(), t = p.n_periods(), K = p.n_regressors();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n) * t);
  VectorXd gb = VectorXd::Zero(K), ga = VectorXd::Zero(n), gg = VectorXd::Zero(t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) {
      double d1 = family.derivatives(p.y(i, j), q.index(p, i, j), 1).d1;
      ga[i] += d1 * q.gamma[j];
      gg[j] += d1 * q.alpha[i];
      for (int k = 0; k < K; ++k) gb[k] += d1 * p.x[k](i, j);
    }
  gb *= scale; ga *= scale; gg *= scale;
  double vnorm2 = q.alpha.squaredNorm() + q.gamma.squaredNorm();
  if (vnorm2 > 0.0) {
    double proj = (ga.dot(q.alpha) - gg.dot(q.gamma)) / vnorm2;
    ga -= proj * q.alpha;
    gg += proj * q.gamma;
  }
  double s = 0.0;
  if (K > 0) s = gb.cwiseAbs().maxCoeff();
  s = std::max(s, ga.cwiseAbs().maxCoeff());
  s = std::max(s, gg.cwiseAbs().maxCoeff());
  return s;
}

inline FitResult alternate_from(const Panel& p, const IndexFamily& family, Params q,
                                const FitOptions& opt) {
  FitResult res;
  double obj = objective(p, family, q);
  res.objective_trace.push_back(obj);
  bool converged = false;
  int k = 0;
  for (; k < opt.max_outer_iters; ++k) {
    q.gamma = profile_gamma(p, family, q.beta, q.alpha, opt, &q.gamma);
    std::tie(q.beta, q.alpha) = profile_beta_alpha(p, family, q.gamma, q.beta, q.alpha, opt);
    double next = objective(p, family, q);
    res.objective_trace.push_back(next);
    double inc = next - obj;
    obj = next;
    if (inc < opt.tol) {
      res.grad_supnorm = gradient_supnorm(p, family, q);
      if (res.grad_supnorm < opt.stationarity_tol) {
        converged = true;
        ++k;
        break;
      }
    }
  }
  if (q.alpha.norm() < 1e-10 || q.gamma.norm() < 1e-10)
    throw degenerate_factor_error("fitted factor collapsed to zero");
  std::tie(q.alpha, q.gamma) = rescale_normalize(q.alpha, q.gamma);
  if (q.gamma.sum() < 0.0) {  // sign convention: sum of time effects >= 0
    q.alpha = -q.alpha;
    q.gamma = -q.gamma;
  }
  res.params = std::move(q);
  res.loglik = objective(p, family, res.params);
  res.outer_iterations = k;
  res.converged = converged;
  res.grad_supnorm = gradient_supnorm(p, family, res.params);
  return res;
}

}  // namespace detail

// Algorithm: additive-time-effect initialization (joint (beta, gamma) fit with
// alpha = 1_N), then alternation of Step 1 / Step 2 until the objective gain
// falls below tol, then the scale normalization.
inline FitResult fit_ife(const Panel& p, const IndexFamily& family, const FitOptions& opt = {}) {
  const int K = p.n_regressors();
  for (int i = 0; i < p.n_units(); ++i)
    for (int j = 0; j < p.n_periods(); ++j) family.require_support(p.y(i, j));

  Params q;
  q.alpha = VectorXd::Ones(p.n_units());
  {
    Panel tp = detail::transposed(p);
    auto [beta0, gamma0] =
        detail::joint_newton(tp, family, q.alpha, VectorXd::Zero(K), VectorXd::Zero(p.n_periods()), opt);
    q.beta = beta0;
    q.gamma = gamma0;
  }
  std::tie(q.beta, q.alpha) = profile_beta_alpha(p, family, q.gamma, q.beta, q.alpha, opt);
  FitResult best = detail::alternate_from(p, family, q, opt);

  if (opt.random_restarts > 0) {
    std::mt19937_64 rng(opt.restart_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int r = 0; r < opt.random_restarts; ++r) {
      Params qr;
      qr.beta = VectorXd::Zero(K);
      qr.alpha = VectorXd::NullaryExpr(p.n_units(), [&](Eigen::Index) { return normal(rng); });
      qr.gamma = VectorXd::NullaryExpr(p.n_periods(), [&](Eigen::Index) { return normal(rng); });
      if (qr.alpha.norm() < 1e-8 || qr.gamma.norm() < 1e-8) continue;
      try {
        FitResult cand = detail::alternate_from(p, family, qr, opt);
        if (cand.loglik > best.loglik) best = std::move(cand);
      } catch (const error&) {
        // a failed restart is not a failure of the fit
      }
    }
  }
  return best;
}

// Concentrated incidental parameters at a fixed beta (used when average
// partial effects are evaluated at a corrected coefficient vector).
inline FitResult profile_phi(const Panel& p, const IndexFamily& family, const VectorXd& beta,
                             Params init, const FitOptions& opt = {}) {
  const int n = p.n_units(), t = p.n_periods(), K = p.n_regressors();
  if (beta.size() != K) throw argument_error("profile_phi: beta length mismatch");
  Params q = std::move(init);
  q.beta = beta;
  PanelMat base = PanelMat::Zero(n, t);
  for (int k = 0; k < K; ++k) base += beta[k] * p.x[k];

  FitResult res;
  double obj = objective(p, family, q);
  res.objective_trace.push_back(obj);
  int k = 0;
  for (; k < opt.max_outer_iters; ++k) {
    q.gamma = profile_gamma(p, family, q.beta, q.alpha, opt, &q.gamma);
    for (int i = 0; i < n; ++i) {
      auto eval = [&](double c, double& g, double& h) {
        double v = 0.0;
        g = 0.0; h = 0.0;
        for (int j = 0; j < t; ++j) {
          DerivativeBundle d = family.derivatives(p.y(i, j), base(i, j) + c * q.gamma[j], 2);
          v += d.value;
          g += d.d1 * q.gamma[j];
          h += d.d2 * q.gamma[j] * q.gamma[j];
        }
        return v;
      };
      q.alpha[i] =
          detail::maximize_concave_1d(eval, q.alpha[i], opt.newton_tol, opt.damping, 200, "profile_phi");
    }
    double next = objective(p, family, q);
    res.objective_trace.push_back(next);
    double inc = next - obj;
    obj = next;
    if (inc < opt.tol) {
      res.converged = true;
      ++k;
      break;
    }
  }
  if (q.alpha.norm() < 1e-10 || q.gamma.norm() < 1e-10)
    throw degenerate_factor_error("profile_phi: factor collapsed to zero");
  std::tie(q.alpha, q.gamma) = rescale_normalize(q.alpha, q.gamma);
  if (q.gamma.sum() < 0.0) {
    q.alpha = -q.alpha;
    q.gamma = -q.gamma;
  }
  res.params = std::move(q);
  res.loglik = objective(p, family, res.params);
  res.outer_iterations = k;
  return res;
}

}  // namespace ifepanel
