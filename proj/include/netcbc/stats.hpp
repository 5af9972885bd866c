#pragma once

// Exact binomial confidence bounds (Clopper-Pearson) built on the
// regularized incomplete beta function. Self-contained: continued-fraction
// evaluation plus bisection for the quantile.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace netcbc {

namespace detail {

/// Continued fraction for the incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("regularized_incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log1p(-x) + a * std::log(x)) *
                   detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Quantile of Beta(a, b) by bisection; monotone CDF makes this robust.
inline double beta_quantile(double p, double a, double b) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("beta_quantile: p outside [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(a, b, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

/// One-sided Clopper-Pearson upper bound on a binomial proportion:
/// the smallest p such that P[X <= successes | p] <= 1 - confidence.
inline double clopper_pearson_upper(long successes, long trials,
                                    double confidence) {
  if (trials <= 0) throw std::domain_error("clopper_pearson_upper: trials <= 0");
  if (successes < 0 || successes > trials)
    throw std::domain_error("clopper_pearson_upper: successes out of range");
  if (successes == trials) return 1.0;
  return beta_quantile(confidence, static_cast<double>(successes) + 1.0,
                       static_cast<double>(trials - successes));
}

/// One-sided Clopper-Pearson lower bound.
inline double clopper_pearson_lower(long successes, long trials,
                                    double confidence) {
  if (trials <= 0) throw std::domain_error("clopper_pearson_lower: trials <= 0");
  if (successes < 0 || successes > trials)
    throw std::domain_error("clopper_pearson_lower: successes out of range");
  if (successes == 0) return 0.0;
  return beta_quantile(1.0 - confidence, static_cast<double>(successes),
                       static_cast<double>(trials - successes) + 1.0);
}

}  // namespace netcbc
