// SPDX-License-Identifier: Apache-2.0
//
// Oracle suites shared by the command-line `oracle` subcommand and the
// acceptance binary. Each suite compares a production routine against an
// independent reference (quadrature, enumeration or sampling) and reports the
// worst deviation seen.
#pragma once

#include "ura/channel_model.hpp"
#include "ura/clustering.hpp"
#include "ura/gamp.hpp"
#include "ura/metrics.hpp"
#include "ura/mrf.hpp"
#include "ura/verify/assignment.hpp"
#include "ura/verify/ising.hpp"
#include "ura/verify/quadrature.hpp"
#include "ura/verify/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ura::verify {

struct OracleReport {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // largest observed deviation, in the unit of `tolerance`
  double tolerance = 0.0;
  std::size_t cases = 0;
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

inline double rel_err(double got, double ref, double abs_floor) {
  return std::abs(got - ref) / std::max(std::abs(ref), abs_floor);
}

template <class F>
OracleReport timed(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  OracleReport r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

/// Closed-form posterior mean, variance and normalizer vs quadrature over
/// r ∈ {-3, -2.5, ..., 3} × μ ∈ {0.1, 1, 10} × ρ ∈ {0.1, 0.5, 0.9} × λ ∈ {0.5, 1, 2}.
inline OracleReport denoiser_oracle(double tol = 1e-6) {
  return detail::timed("denoiser", [&] {
    OracleReport rep;
    rep.tolerance = tol;
    double worst_norm = 0.0;
    for (int ri = -6; ri <= 6; ++ri)
      for (double mu : {0.1, 1.0, 10.0})
        for (double rho : {0.1, 0.5, 0.9})
          for (double lambda : {0.5, 1.0, 2.0}) {
            const double r = 0.5 * ri;
            const auto d = denoise_laplacian(r, mu, rho, lambda);
            const auto q = posterior_quadrature(r, mu, rho, lambda);
            // The mean vanishes at r = 0; there it is measured against the posterior spread.
            const double e = std::max(detail::rel_err(d.mean, q.mean, 1e-9 * std::sqrt(q.variance)),
                                      detail::rel_err(d.variance, q.variance, 0.0));
            worst_norm = std::max(worst_norm, detail::rel_err(std::exp(d.log_i_x), q.normalizer, 0.0));
            if (e > rep.worst) {
              rep.worst = e;
              std::ostringstream os;
              os << "worst at r=" << r << " mu=" << mu << " rho=" << rho << " lambda=" << lambda;
              rep.detail = os.str();
            }
            ++rep.cases;
          }
    rep.detail += "; normalizer rel err " + std::to_string(worst_norm);
    rep.passed = rep.worst <= tol && worst_norm <= 1e-8 && rep.cases >= 324;
    return rep;
  });
}

/// Activity evidence ϖ vs quadrature of the slab integrals, plus λ²μ up to 10³.
inline OracleReport varpi_oracle(double tol = 1e-8) {
  return detail::timed("varpi", [&] {
    OracleReport rep;
    rep.tolerance = tol;
    struct Case {
      double r, mu, lambda;
      bool stiff;  // large λ²μ: ϖ must stay strictly inside (0, 1)
    };
    std::vector<Case> cases;
    for (int r = -3; r <= 3; ++r)
      for (double mu : {0.1, 1.0, 10.0})
        for (double lambda : {0.5, 1.0, 2.0}) cases.push_back({double(r), mu, lambda, false});
    // Large λ²μ: 10, 100, 1000 at several scales.
    for (double prod : {10.0, 100.0, 1000.0})
      for (double mu : {0.1, 1.0, 10.0})
        for (double r : {0.0, 0.5, -2.0}) cases.push_back({r, mu, std::sqrt(prod / mu), true});
    bool finite = true;
    for (const auto& c : cases) {
      const double got = compute_varpi(c.r, c.mu, c.lambda);
      if (!std::isfinite(got) || got < 0.0 || got > 1.0) finite = false;
      if (c.stiff && !(got > 0.0 && got < 1.0)) finite = false;
      const double ref = varpi_quadrature(c.r, c.mu, c.lambda);
      const double e = std::abs(got - ref);
      if (e > rep.worst) {
        rep.worst = e;
        std::ostringstream os;
        os << "worst at r=" << c.r << " mu=" << c.mu << " lambda=" << c.lambda;
        rep.detail = os.str();
      }
      ++rep.cases;
    }
    if (!finite) rep.detail += "; non-finite or saturated varpi";
    rep.passed = finite && rep.worst <= tol;
    return rep;
  });
}

/// EM updates zero the derivative of their surrogate: the σ² score (integrated
/// over the output posterior) and Σρ/λ - Σ∫_{x≠0}|x| p(x|r) for λ.
inline OracleReport em_stationarity_oracle(int instances = 20, std::uint64_t seed = 11, double tol = 1e-6) {
  return detail::timed("em_stationarity", [&] {
    OracleReport rep;
    rep.tolerance = tol;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_sigma = 0.0, worst_lambda = 0.0, worst_argmax = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
      const int rows = 6, cols = 4;
      RealMatrix y(rows, cols), z(rows, cols), mu_z(rows, cols);
      for (Index i = 0; i < y.size(); ++i) {
        z.data()[i] = g(rng);
        y.data()[i] = z.data()[i] + 0.3 * g(rng);
        mu_z.data()[i] = 0.01 + 0.2 * u(rng);
      }
      const double s2 = em_update_sigma2(y, z, mu_z);
      double score = 0.0;
      for (Index i = 0; i < y.size(); ++i)
        score += sigma2_score_quadrature(y.data()[i], z.data()[i], mu_z.data()[i], s2);
      // Derivative w.r.t. ln σ², per entry: dimensionless.
      worst_sigma = std::max(worst_sigma, std::abs(score * s2) / static_cast<double>(y.size()));

      // Golden-section maximization of the expected log-likelihood on a log scale.
      // E(y - z)² per entry by quadrature; the objective is then explicit in σ².
      double sq = 0.0;
      for (Index i = 0; i < y.size(); ++i) sq += expected_square_residual(y.data()[i], z.data()[i], mu_z.data()[i]);
      const double count = static_cast<double>(y.size());
      auto objective = [&](double log_s2) {
        const double v = std::exp(log_s2);
        return -0.5 * count * std::log(2.0 * kPi * v) - 0.5 * sq / v;
      };
      const double arg = std::exp(golden_section_max(objective, std::log(s2) - 3.0, std::log(s2) + 3.0, 1e-9));
      worst_argmax = std::max(worst_argmax, std::abs(arg - s2) / s2);

      const int n = 12;
      RealMatrix rho(n, 1);
      std::vector<DenoiserMoments> moments;
      std::vector<double> r(n), mu(n);
      const double lambda_old = 0.5 + 2.0 * u(rng);
      for (int i = 0; i < n; ++i) {
        r[i] = 2.0 * g(rng);
        mu[i] = 0.05 + u(rng);
        rho(i, 0) = 0.05 + 0.9 * u(rng);
        moments.push_back(denoise_laplacian(r[i], mu[i], rho(i, 0), lambda_old));
      }
      const double lambda_new = em_update_lambda(rho, moments, lambda_old);
      double abs_sum = 0.0;
      for (int i = 0; i < n; ++i) abs_sum += posterior_quadrature(r[i], mu[i], rho(i, 0), lambda_old).abs_slab;
      const double drift = rho.sum() / lambda_new;
      worst_lambda = std::max(worst_lambda, std::abs(drift - abs_sum) / drift);
      rep.cases += 2;
    }
    rep.worst = std::max(worst_sigma, worst_lambda);
    std::ostringstream os;
    os << "sigma2 score " << worst_sigma << ", lambda derivative " << worst_lambda << ", sigma2 argmax rel "
       << worst_argmax;
    rep.detail = os.str();
    rep.passed = rep.worst <= tol && worst_argmax <= 1e-4;
    return rep;
  });
}

/// Loopy BP vs exhaustive Ising marginals on one codeword row.
inline OracleReport mrf_oracle(const std::vector<UpaGeometry>& grids, double tol, int draws, std::uint64_t seed,
                               int rounds = 200) {
  OracleReport rep;
  rep.tolerance = tol;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  MrfParams params;  // α = β = 0.4
  for (const auto& g : grids) {
    for (int k = 0; k < draws; ++k) {
      RealMatrix varpi(2, g.antennas());
      for (Index i = 0; i < varpi.size(); ++i) varpi.data()[i] = u(rng);
      const RealMatrix rho = mrf_pass(varpi, g, params, rounds);
      const RealMatrix ref = ising_extrinsic_marginals(varpi, g, params.alpha, params.beta);
      const double e = (rho - ref).cwiseAbs().maxCoeff();
      if (e > rep.worst) {
        rep.worst = e;
        rep.detail = "worst on " + std::to_string(g.m_v) + "x" + std::to_string(g.m_h);
      }
      ++rep.cases;
    }
  }
  rep.passed = rep.worst <= tol;
  return rep;
}

inline OracleReport mrf_chain_oracle(double tol = 1e-8) {
  return detail::timed("mrf_chain", [&] {
    std::vector<UpaGeometry> grids;
    for (int m = 1; m <= 10; ++m) {
      grids.push_back({1, m, 0.5});
      grids.push_back({m, 1, 0.5});
    }
    return mrf_oracle(grids, tol, 5, 21);
  });
}

inline OracleReport mrf_grid_oracle(double tol = 1e-6) {
  return detail::timed("mrf_2x2", [&] { return mrf_oracle({{2, 2, 0.5}}, tol, 20, 22); });
}

/// Hungarian cost vs factorial enumeration; costs must match bit for bit.
inline OracleReport hungarian_oracle(int matrices = 500, std::uint64_t seed = 31) {
  return detail::timed("hungarian", [&] {
    OracleReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    int mismatches = 0;
    for (int i = 0; i < matrices; ++i) {
      const int k = 2 + i % 6;
      RealMatrix c(k, k);
      for (Index e = 0; e < c.size(); ++e) c.data()[e] = u(rng);
      const double got = hungarian_solve(c).cost;
      const double ref = brute_force_assignment_cost(c);
      if (got != ref) ++mismatches;
      rep.worst = std::max(rep.worst, std::abs(got - ref));
      ++rep.cases;
    }
    rep.detail = std::to_string(mismatches) + " mismatches";
    rep.passed = mismatches == 0;
    return rep;
  });
}

/// UᴴU = I up to M = 256 and the single-ray peak bin vs an exhaustive magnitude scan.
inline OracleReport unitarity_peak_oracle(int angles = 1000, std::uint64_t seed = 41, double tol = 1e-10) {
  return detail::timed("unitarity_peak", [&] {
    OracleReport rep;
    rep.tolerance = tol;
    const std::vector<UpaGeometry> geoms{{1, 1, 0.5}, {2, 1, 0.5}, {4, 8, 0.5},  {4, 25, 0.5},
                                         {8, 16, 0.5}, {16, 16, 0.5}, {3, 7, 0.5}, {4, 8, 1.0}};
    for (const auto& g : geoms) {
      const ComplexMatrix u = angular_transform_matrix(g);
      const ComplexMatrix gram = u.adjoint() * u - ComplexMatrix::Identity(g.antennas(), g.antennas());
      rep.worst = std::max(rep.worst, gram.cwiseAbs().maxCoeff());
      ++rep.cases;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
    const UpaGeometry g{4, 25, 0.5};
    const ComplexMatrix u = angular_transform_matrix(g);
    int misses = 0;
    for (int i = 0; i < angles; ++i) {
      const double el = ang(rng), az = ang(rng);
      const ComplexVector h = u.adjoint() * upa_response(el, az, g);
      Index best = 0;
      h.cwiseAbs().maxCoeff(&best);
      if (peak_support_predicate(el, az, g).linear(g) != best) ++misses;
      ++rep.cases;
    }
    std::ostringstream os;
    os << "max |U^H U - I| = " << rep.worst << ", peak mismatches " << misses << "/" << angles;
    rep.detail = os.str();
    rep.passed = rep.worst < tol && misses == 0;
    return rep;
  });
}

/// Γ̄(M, υ/ϱ²)/Γ(M) vs P(χ²_{2M} > 2υ/ϱ²) sampled, υ = 2Mϱ².
inline OracleReport pupe_oracle(std::uint64_t samples = 1000000, std::uint64_t seed = 51) {
  return detail::timed("pupe_chi_square", [&] {
    OracleReport rep;
    rep.tolerance = 3.0;  // standard errors
    const double varrho2 = 1.0, c = 2.0;
    double prev = 2.0;
    bool decreasing = true;
    std::ostringstream os;
    for (int m : {8, 16, 32, 64, 128}) {
      const double upsilon = c * m * varrho2;
      const double p = pupe_analytic(m, upsilon, varrho2);
      const auto mc = chi_square_tail(2 * m, 2.0 * upsilon / varrho2, samples, seed + static_cast<std::uint64_t>(m));
      const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(samples));
      const double z = se > 0.0 ? std::abs(mc.probability - p) / se : (mc.probability == p ? 0.0 : 1e300);
      // Tails far below 1/samples are only checked for zero hits.
      const double score = (p * static_cast<double>(samples) < 1e-3 && mc.probability == 0.0) ? 0.0 : z;
      rep.worst = std::max(rep.worst, score);
      if (!(p < prev)) decreasing = false;
      prev = p;
      os << "M=" << m << " p=" << p << " mc=" << mc.probability << "; ";
      ++rep.cases;
    }
    os << (decreasing ? "strictly decreasing" : "NOT decreasing");
    rep.detail = os.str();
    rep.passed = decreasing && rep.worst <= rep.tolerance;
    return rep;
  });
}

inline std::vector<OracleReport> run_oracle_suite() {
  return {denoiser_oracle(),   varpi_oracle(),     em_stationarity_oracle(), mrf_chain_oracle(),
          mrf_grid_oracle(),   hungarian_oracle(), unitarity_peak_oracle(),  pupe_oracle()};
}

}  // namespace ura::verify
