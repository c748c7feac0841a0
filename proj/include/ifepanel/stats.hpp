#pragma once

#include <cmath>
#include <limits>

namespace ifepanel {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kSqrt2 = 1.4142135623730950488;

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// Mills ratio Phi(-x)/phi(x) for x > 0 via the Laplace continued fraction
// 1/(x + 1/(x + 2/(x + 3/(...)))).  Used in the far tail where erfc underflows
// or loses relative accuracy.
inline double mills_ratio_cf(double x) {
  double f = 0.0;
  for (int k = 60; k >= 1; --k) f = static_cast<double>(k) / (x + f);
  return 1.0 / (x + f);
}

// log Phi(z), stable over the whole real line.
inline double norm_logcdf(double z) {
  if (z >= 0.0) return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  if (z > -6.0) return std::log(0.5 * std::erfc(-z / kSqrt2));
  return -0.5 * z * z - kLogSqrt2Pi + std::log(mills_ratio_cf(-z));
}

// Hazard ratio phi(z)/Phi(z); diverges like -z as z -> -inf.
inline double norm_hazard(double z) {
  if (z > -6.0) return norm_pdf(z) / norm_cdf(z);
  return 1.0 / mills_ratio_cf(-z);
}

// Inverse standard normal CDF (Acklam's rational approximation refined by one
// Halley step against erfc; ~1e-15 absolute over (0,1)).
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement
  double e = norm_cdf(x) - p;
  double u = e / norm_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace ifepanel
