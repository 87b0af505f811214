#ifndef DQR_DISTRIBUTIONS_HPP_
#define DQR_DISTRIBUTIONS_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dqr/errors.hpp"

namespace dqr {

//! Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

//! Standard normal density.
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

//! Standard normal quantile (inverse CDF).
//!
//! Acklam's rational approximation refined by one Halley step against erfc,
//! accurate to ~1e-14 over (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement.
  const double err = normal_cdf(x) - p;
  const double u = err / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace detail {

//! Regularized lower incomplete gamma P(a, x) via series (x < a+1) or
//! continued fraction (modified Lentz), following the classic treatment.
inline double regularized_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double log_gamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
  }
  // Continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
  return 1.0 - q;
}

}  // namespace detail

//! Chi-square density with df degrees of freedom.
inline double chi2_pdf(int df, double x) {
  if (x <= 0.0) return 0.0;
  const double half_df = 0.5 * df;
  return std::exp((half_df - 1.0) * std::log(x) - 0.5 * x - half_df * std::numbers::ln2 -
                  std::lgamma(half_df));
}

//! P(chi2_df <= x).
inline double chi2_cdf(int df, double x) {
  if (df < 1) throw std::invalid_argument("chi2_cdf: df must be >= 1");
  if (x <= 0.0) return 0.0;
  return detail::regularized_gamma_p(0.5 * df, 0.5 * x);
}

//! Upper quantile of the chi-square distribution: the x with P(chi2_df > x) = u.
//!
//! Inverts the regularized incomplete gamma function with a Wilson-Hilferty
//! start and bracketed Newton iterations.
inline double chi2_upper_quantile(int df, double u) {
  if (df < 1) throw std::invalid_argument("chi2_upper_quantile: df must be >= 1");
  if (!(u > 0.0 && u < 1.0)) {
    throw std::invalid_argument("chi2_upper_quantile: u must lie in (0,1)");
  }
  const double target = 1.0 - u;  // lower-tail probability
  // Wilson-Hilferty initial guess.
  const double z = normal_quantile(target);
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  double x = df * t * t * t;
  if (!(x > 0.0) || !std::isfinite(x)) x = 0.5 * df;

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi2_cdf(df, x) - target;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double pdf = chi2_pdf(df, x);
    double next = (pdf > 0.0) ? x - f / pdf : x;
    if (!(next > lo) || !(next < hi)) {
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * (lo + 1.0);
    }
    if (std::abs(next - x) <= 1e-13 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

//! CDF of the standard Student t distribution with 3 degrees of freedom
//! (closed form).
inline double student_t3_cdf(double x) {
  const double s = x / std::numbers::sqrt3;
  return 0.5 + (s / (1.0 + s * s) + std::atan(s)) / std::numbers::pi;
}

//! Quantile of the standard Student t distribution with 3 degrees of freedom.
inline double student_t3_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("student_t3_quantile: p must lie in (0,1)");
  }
  double lo = -1.0;
  double hi = 1.0;
  while (student_t3_cdf(lo) > p) lo *= 2.0;
  while (student_t3_cdf(hi) < p) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (student_t3_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14 * (1.0 + std::abs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace dqr

#endif  // DQR_DISTRIBUTIONS_HPP_
