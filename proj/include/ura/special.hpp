// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace ura::special {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

inline double std_normal_pdf(double u) { return std::exp(-0.5 * u * u - kLogSqrt2Pi); }

/// phi(u) / Phi(-u), the inverse Mills ratio. Finite for every finite u.
inline double inv_mills(double u) {
  if (u < 30.0) {
    const double tail = 0.5 * std::erfc(u * kInvSqrt2);
    return std_normal_pdf(u) / tail;
  }
  // Laplace continued fraction for Phi(-u)/phi(u), evaluated bottom-up.
  double frac = u;
  for (int k = 40; k >= 1; --k) frac = u + k / frac;
  return frac;
}

/// log Phi(x) without underflow in the far left tail.
inline double log_std_normal_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > -30.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  return -0.5 * x * x - kLogSqrt2Pi - std::log(inv_mills(-x));
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace ura::special
