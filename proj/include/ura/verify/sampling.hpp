// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace ura::verify {

struct TailEstimate {
  double probability = 0.0;
  std::uint64_t samples = 0;
};

/// Monte-Carlo P(χ²_{dof} > t).
inline TailEstimate chi_square_tail(int dof, double t, std::uint64_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::chi_squared_distribution<double> chi(static_cast<double>(dof));
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < samples; ++i)
    if (chi(rng) > t) ++hits;
  return {static_cast<double>(hits) / static_cast<double>(samples), samples};
}

/// Golden-section search for the maximizer of a unimodal f on [lo, hi].
inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi, double rel_tol = 1e-10,
                                 int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > rel_tol * (std::abs(a) + std::abs(b)); ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace ura::verify
