#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ifepanel/errors.hpp"
#include "ifepanel/stats.hpp"

namespace ifepanel {

enum class FamilyKind { linear, probit, logit, poisson };

struct DerivativeBundle {
  double value = 0.0;
  double d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0;
};

struct ConcavityReport {
  double min_neg_d2 = 0.0;  // empirical b_min over the grid
  double max_neg_d2 = 0.0;  // empirical b_max
  int n_violations = 0;     // points with -d2 <= 0
  bool concave = true;
};

namespace detail {

inline double softplus(double z) {
  if (z > 30.0) return z;
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace detail

// Single-index log-likelihood family: log f_Y(y | z) with z the index.
// Exposes the index derivatives to fourth order and the conditional mean
// function used by partial-effect specs.
class IndexFamily {
 public:
  static IndexFamily linear(double sigma) {
    if (!(sigma > 0.0)) throw argument_error("linear family requires sigma > 0");
    IndexFamily f;
    f.kind_ = FamilyKind::linear;
    f.sigma_ = sigma;
    return f;
  }
  static IndexFamily probit() { return IndexFamily(FamilyKind::probit); }
  static IndexFamily logit() { return IndexFamily(FamilyKind::logit); }
  static IndexFamily poisson() { return IndexFamily(FamilyKind::poisson); }

  // "linear:sigma=<v>", "probit", "logit", "poisson"
  static IndexFamily parse(const std::string& spec) {
    if (spec == "probit") return probit();
    if (spec == "logit") return logit();
    if (spec == "poisson") return poisson();
    if (spec == "linear") return linear(1.0);
    const std::string prefix = "linear:sigma=";
    if (spec.rfind(prefix, 0) == 0) {
      try {
        return linear(std::stod(spec.substr(prefix.size())));
      } catch (const std::exception&) {
        throw argument_error("bad sigma in family spec '" + spec + "'");
      }
    }
    throw argument_error("unknown family '" + spec + "'");
  }

  FamilyKind kind() const { return kind_; }
  double sigma() const { return sigma_; }

  std::string name() const {
    switch (kind_) {
      case FamilyKind::linear: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "linear:sigma=%g", sigma_);
        return buf;
      }
      case FamilyKind::probit: return "probit";
      case FamilyKind::logit: return "logit";
      case FamilyKind::poisson: return "poisson";
    }
    return "?";
  }

  // Same family with a different scale; identity for non-linear kinds.
  IndexFamily with_sigma(double sigma) const {
    return kind_ == FamilyKind::linear ? linear(sigma) : *this;
  }

  bool supports(double y) const {
    switch (kind_) {
      case FamilyKind::linear: return std::isfinite(y);
      case FamilyKind::probit:
      case FamilyKind::logit: return y == 0.0 || y == 1.0;
      case FamilyKind::poisson:
        return y >= 0.0 && std::isfinite(y) && std::abs(y - std::round(y)) < 1e-9;
    }
    return false;
  }

  void require_support(double y) const {
    if (!supports(y))
      throw support_error("outcome " + std::to_string(y) + " outside support of family " + name());
  }

  double loglik(double y, double z) const {
    require_support(y);
    switch (kind_) {
      case FamilyKind::linear: {
        double r = (y - z) / sigma_;
        return -kLogSqrt2Pi - std::log(sigma_) - 0.5 * r * r;
      }
      case FamilyKind::probit: {
        double s = (2.0 * y - 1.0) * z;
        return norm_logcdf(s);
      }
      case FamilyKind::logit:
        return y * z - detail::softplus(z);
      case FamilyKind::poisson:
        return y * z - std::exp(z) - std::lgamma(y + 1.0);
    }
    return 0.0;
  }

  DerivativeBundle derivatives(double y, double z, int max_order = 4) const {
    if (max_order < 1 || max_order > 4)
      throw argument_error("max_order must be in 1..4");
    require_support(y);
    DerivativeBundle b;
    b.value = loglik(y, z);
    switch (kind_) {
      case FamilyKind::linear: {
        double s2 = sigma_ * sigma_;
        b.d1 = (y - z) / s2;
        b.d2 = -1.0 / s2;
        b.d3 = 0.0;
        b.d4 = 0.0;
        break;
      }
      case FamilyKind::probit: {
        // l(z) = log Phi(s), s = (2y-1) z; m = phi/Phi evaluated at s.
        double c = 2.0 * y - 1.0;
        double s = c * z;
        double m = norm_hazard(s);
        double m1 = -m * (s + m);
        double m2 = -m1 * (s + m) - m * (1.0 + m1);
        double m3 = -m2 * (s + 2.0 * m) - 2.0 * m1 * (1.0 + m1);
        b.d1 = c * m;
        b.d2 = m1;
        b.d3 = c * m2;
        b.d4 = m3;
        break;
      }
      case FamilyKind::logit: {
        double p = detail::logistic(z);
        double w = p * (1.0 - p);
        b.d1 = y - p;
        b.d2 = -w;
        b.d3 = -w * (1.0 - 2.0 * p);
        b.d4 = -w * (1.0 - 6.0 * p + 6.0 * p * p);
        break;
      }
      case FamilyKind::poisson: {
        double e = std::exp(z);
        b.d1 = y - e;
        b.d2 = -e;
        b.d3 = -e;
        b.d4 = -e;
        break;
      }
    }
    return b;
  }

  // Conditional mean E[Y|z] and its first three z-derivatives (used by the
  // partial-effect specs).
  double mean(double z) const {
    switch (kind_) {
      case FamilyKind::linear: return z;
      case FamilyKind::probit: return norm_cdf(z);
      case FamilyKind::logit: return detail::logistic(z);
      case FamilyKind::poisson: return std::exp(z);
    }
    return 0.0;
  }
  double mean_d1(double z) const {
    switch (kind_) {
      case FamilyKind::linear: return 1.0;
      case FamilyKind::probit: return norm_pdf(z);
      case FamilyKind::logit: {
        double p = detail::logistic(z);
        return p * (1.0 - p);
      }
      case FamilyKind::poisson: return std::exp(z);
    }
    return 0.0;
  }
  double mean_d2(double z) const {
    switch (kind_) {
      case FamilyKind::linear: return 0.0;
      case FamilyKind::probit: return -z * norm_pdf(z);
      case FamilyKind::logit: {
        double p = detail::logistic(z);
        return p * (1.0 - p) * (1.0 - 2.0 * p);
      }
      case FamilyKind::poisson: return std::exp(z);
    }
    return 0.0;
  }
  double mean_d3(double z) const {
    switch (kind_) {
      case FamilyKind::linear: return 0.0;
      case FamilyKind::probit: return (z * z - 1.0) * norm_pdf(z);
      case FamilyKind::logit: {
        double p = detail::logistic(z);
        return p * (1.0 - p) * (1.0 - 6.0 * p + 6.0 * p * p);
      }
      case FamilyKind::poisson: return std::exp(z);
    }
    return 0.0;
  }

 private:
  IndexFamily() = default;
  explicit IndexFamily(FamilyKind k) : kind_(k) {}
  FamilyKind kind_ = FamilyKind::linear;
  double sigma_ = 1.0;
};

inline ConcavityReport check_concavity(const IndexFamily& family,
                                       const std::vector<double>& y_samples,
                                       const std::vector<double>& z_grid) {
  if (z_grid.empty()) throw argument_error("check_concavity: empty z grid");
  if (y_samples.empty()) throw argument_error("check_concavity: empty y sample");
  ConcavityReport rep;
  bool first = true;
  for (double y : y_samples) {
    for (double z : z_grid) {
      double neg_d2 = -family.derivatives(y, z, 2).d2;
      if (first) {
        rep.min_neg_d2 = rep.max_neg_d2 = neg_d2;
        first = false;
      } else {
        rep.min_neg_d2 = std::min(rep.min_neg_d2, neg_d2);
        rep.max_neg_d2 = std::max(rep.max_neg_d2, neg_d2);
      }
      if (!(neg_d2 > 0.0)) ++rep.n_violations;
    }
  }
  rep.concave = rep.n_violations == 0;
  return rep;
}

}  // namespace ifepanel
