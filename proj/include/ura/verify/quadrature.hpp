// SPDX-License-Identifier: Apache-2.0
//
// Numerical-integration references for the scalar estimator formulas. Nothing
// here reuses the closed forms: every quantity is integrated directly from the
// densities with adaptive Gauss-Kronrod on finite windows around the mass.
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ura::verify {

inline constexpr double kQuadTol = 1e-14;
inline constexpr double kWindowSigmas = 40.0;
inline constexpr unsigned kMaxDepth = 15;

inline double gauss_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * 3.14159265358979323846 * var);
}

/// ∫_a^b f, split at the sorted interior `breaks`.
inline double integrate(const std::function<double(double)>& f, double a, double b, std::vector<double> breaks = {}) {
  using boost::math::quadrature::gauss_kronrod;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
    if (hi <= lo) continue;
    total += gauss_kronrod<double, 61>::integrate(f, lo, hi, kMaxDepth, kQuadTol);
  }
  return total;
}

/// Integrals of g(x)·N(x; r, μ)·(λ/2)e^{-λ|x|} over x < 0 and x > 0.
struct HalfLineIntegrals {
  double minus = 0.0;
  double plus = 0.0;
};

inline HalfLineIntegrals slab_integrals(double r, double mu, double lambda, const std::function<double(double)>& g) {
  const double s = std::sqrt(mu);
  auto f = [&](double x) { return g(x) * gauss_pdf(x, r, mu) * 0.5 * lambda * std::exp(-lambda * std::abs(x)); };
  // Tilted peaks: r + λμ on the negative side, r - λμ on the positive side.
  const double pm = std::min(0.0, r + lambda * mu);
  const double pp = std::max(0.0, r - lambda * mu);
  HalfLineIntegrals out;
  out.minus = integrate(f, pm - kWindowSigmas * s, 0.0, {pm});
  out.plus = integrate(f, 0.0, pp + kWindowSigmas * s, {pp});
  return out;
}

/// ϖ = ψ-slab / (ψ-slab + N(0; r, μ)), ψ-slab = ∫ N(x; r, μ)(λ/2)e^{-λ|x|} dx.
inline double varpi_quadrature(double r, double mu, double lambda) {
  const auto i = slab_integrals(r, mu, lambda, [](double) { return 1.0; });
  const double slab = i.minus + i.plus;
  return slab / (slab + gauss_pdf(0.0, r, mu));
}

struct PosteriorReference {
  double normalizer = 0.0;  // (1-ρ)N(0; r, μ) + ρ ∫ N(x; r, μ)(λ/2)e^{-λ|x|} dx
  double mean = 0.0;
  double variance = 0.0;
  double abs_slab = 0.0;  // ∫_{x≠0} |x| p(x | r) dx
};

/// Moments of p(x) ∝ N(x; r, μ)·[ρ(λ/2)e^{-λ|x|} + (1-ρ)δ(x)].
inline PosteriorReference posterior_quadrature(double r, double mu, double rho, double lambda) {
  PosteriorReference out;
  const auto z = slab_integrals(r, mu, lambda, [](double) { return 1.0; });
  out.normalizer = (1.0 - rho) * gauss_pdf(0.0, r, mu) + rho * (z.minus + z.plus);
  const auto m1 = slab_integrals(r, mu, lambda, [](double x) { return x; });
  out.mean = rho * (m1.minus + m1.plus) / out.normalizer;
  const double m = out.mean;
  const auto c2 = slab_integrals(r, mu, lambda, [m](double x) { return (x - m) * (x - m); });
  // The spike at zero contributes (0 - m)² with weight (1-ρ)N(0; r, μ).
  out.variance = (rho * (c2.minus + c2.plus) + (1.0 - rho) * gauss_pdf(0.0, r, mu) * m * m) / out.normalizer;
  const auto a1 = slab_integrals(r, mu, lambda, [](double x) { return std::abs(x); });
  out.abs_slab = rho * (a1.minus + a1.plus) / out.normalizer;
  return out;
}

/// Mean and variance of z under N(z; p, μ^p)·N(y; z, σ²), integrated over z.
struct OutputReference {
  double mean = 0.0;
  double variance = 0.0;
};

inline OutputReference output_posterior_quadrature(double p, double mu_p, double y, double sigma2) {
  auto w = [&](double z) { return gauss_pdf(z, p, mu_p) * gauss_pdf(y, z, sigma2); };
  const double width = std::sqrt(std::min(mu_p, sigma2));
  const double centre = (mu_p * y + sigma2 * p) / (mu_p + sigma2);
  const double lo = centre - kWindowSigmas * width, hi = centre + kWindowSigmas * width;
  const double z0 = integrate(w, lo, hi, {centre});
  const double z1 = integrate([&](double z) { return z * w(z); }, lo, hi, {centre});
  const double m = z1 / z0;
  const double z2 = integrate([&](double z) { return (z - m) * (z - m) * w(z); }, lo, hi, {centre});
  return {m, z2 / z0};
}

/// ∫ N(z; ẑ, μ^z) (y - z)² dz.
inline double expected_square_residual(double y, double z_hat, double mu_z) {
  const double s = std::sqrt(mu_z);
  return integrate([&](double z) { return gauss_pdf(z, z_hat, mu_z) * (y - z) * (y - z); }, z_hat - kWindowSigmas * s,
                   z_hat + kWindowSigmas * s, {z_hat});
}

/// ∫ N(z; ẑ, μ^z) · d/dσ² ln N(y; z, σ²) dz, the per-entry σ² score. The
/// polynomial part is integrated on its own: the score itself can vanish, which
/// would leave a relative quadrature tolerance unreachable.
inline double sigma2_score_quadrature(double y, double z_hat, double mu_z, double sigma2) {
  return 0.5 / sigma2 * (expected_square_residual(y, z_hat, mu_z) / sigma2 - 1.0);
}

}  // namespace ura::verify
