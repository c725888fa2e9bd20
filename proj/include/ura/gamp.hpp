// SPDX-License-Identifier: Apache-2.0
//
// EM-MRF-GAMP: generalized approximate message passing with a Bernoulli-Laplacian
// prior whose activity probabilities come from the Ising support model
// (ura/mrf.hpp), and EM re-estimation of the noise variance σ² and Laplace rate λ.
//
// All matrices follow the real-valued model Y = A X + W with A of size
// 2N × 2^{J+1}; rows j and j + 2^J of X are the real and imaginary parts of
// codeword row j of the complex signal.
#pragma once

#include "ura/codec.hpp"
#include "ura/common.hpp"
#include "ura/mrf.hpp"
#include "ura/special.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace ura {

inline constexpr double kVarianceFloor = 1e-12;

// ---------------------------------------------------------------------------
// Scalar Bernoulli-Laplacian machinery

/// Pieces shared by ϖ, the posterior moments and the λ update for one entry.
/// The Laplacian slab splits at zero into two Gaussian tails:
///   I⁻ = (λ/2) exp(λ²μ/2 + λr) Φ(-r⁻/√μ),  r⁻ = r + λμ
///   I⁺ = (λ/2) exp(λ²μ/2 - λr) Φ( r⁺/√μ),  r⁺ = r - λμ
/// Everything is held in log form.
struct LaplaceTerms {
  double r_minus = 0.0;
  double r_plus = 0.0;
  double log_i_minus = 0.0;
  double log_i_plus = 0.0;
  double log_null = 0.0;       // log N(0; r, μ)
  double tail_mean_minus = 0.0;  // mean of N(r⁻, μ) restricted to x < 0
  double tail_mean_plus = 0.0;   // mean of N(r⁺, μ) restricted to x > 0
  double tail_var_minus = 0.0;
  double tail_var_plus = 0.0;
};

inline LaplaceTerms laplace_terms(double r, double mu_r, double lambda) {
  LaplaceTerms t;
  const double s = std::sqrt(mu_r);
  const double log_half_lambda = std::log(0.5 * lambda);
  const double shift = lambda * mu_r;
  t.r_minus = r + shift;
  t.r_plus = r - shift;
  const double a = t.r_minus / s;   // upper truncation at 0 sits at -a standard deviations
  const double b = -t.r_plus / s;   // lower truncation at 0 sits at  b standard deviations
  t.log_null = special::log_normal_pdf(0.0, r, mu_r);
  const double ha = special::inv_mills(a);
  const double hb = special::inv_mills(b);
  // For a positive truncation point the exponent λ²μ/2 ± λr cancels against
  // log Φ(-a) ≈ -a²/2; the Mills form I = (λ/2)·sqrt(μ)·N(0; r, μ)/h(a) does not.
  auto log_i = [&](double lin, double z, double h) {
    if (z > 0.0) return log_half_lambda + std::log(s) + t.log_null - std::log(h);
    return log_half_lambda + 0.5 * lambda * shift + lin + special::log_std_normal_cdf(-z);
  };
  t.log_i_minus = log_i(lambda * r, a, ha);
  t.log_i_plus = log_i(-lambda * r, b, hb);
  t.tail_mean_minus = t.r_minus - s * ha;
  t.tail_mean_plus = t.r_plus + s * hb;
  t.tail_var_minus = std::max(0.0, mu_r * (1.0 - ha * (ha - a)));
  t.tail_var_plus = std::max(0.0, mu_r * (1.0 - hb * (hb - b)));
  return t;
}

/// Probability that the slab (rather than the spike) explains r̂, with equal
/// prior odds: (I⁻ + I⁺) / (N(0; r̂, μ^r) + I⁻ + I⁺).
inline double compute_varpi(double r, double mu_r, double lambda) {
  require(mu_r > 0.0 && lambda > 0.0, ErrorKind::invalid_parameter, "varpi needs mu_r > 0 and lambda > 0");
  const LaplaceTerms t = laplace_terms(r, mu_r, lambda);
  const double log_slab = special::log_add_exp(t.log_i_minus, t.log_i_plus);
  return special::logistic(log_slab - t.log_null);
}

struct DenoiserMoments {
  double mean = 0.0;
  double variance = 0.0;
  double r_minus = 0.0;  // r̂⁻ = r̂ + λμ^r
  double r_plus = 0.0;   // r̂⁺ = r̂ - λμ^r
  double log_i_minus = 0.0;
  double log_i_plus = 0.0;
  double log_i_x = 0.0;  // normalizer (1-ρ)N(0; r̂, μ^r) + ρ(I⁻ + I⁺)
  double weight_minus = 0.0;  // ρ I⁻ / I_x
  double weight_plus = 0.0;   // ρ I⁺ / I_x
  double tail_mean_minus = 0.0;
  double tail_mean_plus = 0.0;

  double i_minus() const { return std::exp(log_i_minus); }
  double i_plus() const { return std::exp(log_i_plus); }
  double i_x() const { return std::exp(log_i_x); }

  /// Posterior E{|x|} restricted to x ≠ 0; the per-entry λ-update denominator.
  double abs_moment() const { return weight_plus * tail_mean_plus - weight_minus * tail_mean_minus; }
};

/// Posterior mean and variance of N(x; r̂, μ^r)·[ρ(λ/2)e^{-λ|x|} + (1-ρ)δ(x)].
inline DenoiserMoments denoise_laplacian(const LaplaceTerms& t, double rho) {
  DenoiserMoments d;
  d.r_minus = t.r_minus;
  d.r_plus = t.r_plus;
  d.log_i_minus = t.log_i_minus;
  d.log_i_plus = t.log_i_plus;
  d.tail_mean_minus = t.tail_mean_minus;
  d.tail_mean_plus = t.tail_mean_plus;
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (rho <= 0.0) {
    d.log_i_x = t.log_null;
    return d;
  }
  const double log_rho = std::log(rho);
  const double log_w0 = rho >= 1.0 ? ninf : std::log1p(-rho) + t.log_null;
  const double log_wm = log_rho + t.log_i_minus;
  const double log_wp = log_rho + t.log_i_plus;
  d.log_i_x = special::log_add_exp(log_w0, special::log_add_exp(log_wm, log_wp));
  const double w0 = std::exp(log_w0 - d.log_i_x);
  d.weight_minus = std::exp(log_wm - d.log_i_x);
  d.weight_plus = std::exp(log_wp - d.log_i_x);
  d.mean = d.weight_minus * t.tail_mean_minus + d.weight_plus * t.tail_mean_plus;
  const double dm = t.tail_mean_minus - d.mean;
  const double dp = t.tail_mean_plus - d.mean;
  d.variance = w0 * d.mean * d.mean + d.weight_minus * (t.tail_var_minus + dm * dm) +
               d.weight_plus * (t.tail_var_plus + dp * dp);
  return d;
}

inline DenoiserMoments denoise_laplacian(double r, double mu_r, double rho, double lambda) {
  return denoise_laplacian(laplace_terms(r, mu_r, lambda), std::clamp(rho, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// EM updates

/// σ² = Σ[(y - ẑ)² + μ^z] / (2NM), floored relative to the observation energy.
inline double em_update_sigma2(const RealMatrix& y, const RealMatrix& z_hat, const RealMatrix& mu_z) {
  require(y.rows() == z_hat.rows() && y.cols() == z_hat.cols() && y.rows() == mu_z.rows() &&
              y.cols() == mu_z.cols(),
          ErrorKind::invalid_dimension, "sigma2 update: dimension mismatch");
  const double count = static_cast<double>(y.size());
  const double sigma2 = ((y - z_hat).squaredNorm() + mu_z.sum()) / count;
  const double floor = std::max(std::numeric_limits<double>::epsilon() * y.squaredNorm() / count,
                                std::numeric_limits<double>::min());
  return std::max(sigma2, floor);
}

/// λ = Σρ / Σ(ρ/I_x)(I⁺[...] - I⁻[...]); keeps `previous` when the denominator is not positive.
inline double em_update_lambda(const RealMatrix& rho, const std::vector<DenoiserMoments>& moments,
                               double previous) {
  require(static_cast<std::size_t>(rho.size()) == moments.size(), ErrorKind::invalid_dimension,
          "lambda update: rho and moment grid differ in size");
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < rho.size(); ++i) {
    num += rho.data()[i];
    den += moments[static_cast<std::size_t>(i)].abs_moment();
  }
  if (!(den > 0.0) || !(num > 0.0) || !std::isfinite(num / den)) return previous;
  return num / den;
}

// ---------------------------------------------------------------------------
// Estimator state and steps

enum class ThresholdRule { null_level, fixed_fraction, fixed };

struct ThresholdConfig {
  ThresholdRule rule = ThresholdRule::null_level;
  double c = 2.0;         // null_level: υ = c·M·ϱ̂²
  double fraction = 0.1;  // fixed_fraction: υ = fraction · max row energy
  double value = 0.0;     // fixed: υ itself
  // null_level only: υ is at least this fraction of the strongest row energy.
  // Near-noiseless estimates leak codebook cross-talk into null rows that sits
  // far below any real user but above the (vanishing) Gaussian null level.
  double relative_floor = 1e-6;
};

struct GampConfig {
  int t_max = 50;
  int t_mrf = 20;
  double tau = 1e-5;
  double damping = 1.0;
  double snr_hint = 100.0;  // linear R used for the σ² initializer
  double lambda_init = 1.0;
  std::optional<double> sigma2_init;  // overrides the R-based initializer
  bool learn_sigma2 = true;
  bool learn_lambda = true;
  MrfParams mrf;
  bool mrf_warm_start = true;
  std::optional<double> fixed_rho;  // bypass the MRF module with a constant activity belief
  ThresholdConfig threshold;
};

struct GampState {
  RealMatrix x_hat, mu_x;  // 2^{J+1} × M
  RealMatrix p_hat, mu_p;  // 2N × M
  RealMatrix z_hat, mu_z;
  RealMatrix s_hat, mu_s;
  RealMatrix r_hat, mu_r;  // 2^{J+1} × M
  RealMatrix varpi, rho;
  std::vector<DenoiserMoments> moments;
  double sigma2 = 1.0;
  double lambda = 1.0;
  int iteration = 0;
  std::uint64_t dense_macs = 0;  // multiply-accumulates spent in dense products
};

/// A and its elementwise square |A|².
struct SensingOperator {
  RealMatrix a;
  RealMatrix a_sq;

  explicit SensingOperator(const RealMatrix& m) : a(m), a_sq(m.array().square().matrix()) {}
  explicit SensingOperator(const SlotCodebook& cb) : SensingOperator(cb.real_matrix) {}
};

inline GampState init_state(const RealMatrix& y, const SensingOperator& op, const GampConfig& cfg) {
  require(y.rows() == op.a.rows(), ErrorKind::invalid_dimension, "observation rows must equal 2N");
  GampState st;
  const Index cols = op.a.cols();
  const Index m = y.cols();
  st.lambda = cfg.lambda_init;
  st.x_hat = RealMatrix::Zero(cols, m);
  st.mu_x = RealMatrix::Constant(cols, m, 2.0 / (st.lambda * st.lambda));
  st.s_hat = RealMatrix::Zero(y.rows(), m);
  st.sigma2 = cfg.sigma2_init ? *cfg.sigma2_init
                              : y.squaredNorm() / (static_cast<double>(y.size()) * (cfg.snr_hint + 1.0));
  st.sigma2 = std::max(st.sigma2, std::numeric_limits<double>::min());
  return st;
}

/// Output-node half of one iteration: μ^p, p̂ (Onsager-corrected), ẑ, μ^z, ŝ, μ^s.
inline void output_node_step(GampState& st, const SensingOperator& op, const RealMatrix& y, double damping = 1.0) {
  require(st.x_hat.rows() == op.a.cols() && y.rows() == op.a.rows() && st.x_hat.cols() == y.cols(),
          ErrorKind::invalid_dimension, "output step: state does not match operator/observation");
  const Index n2 = op.a.rows(), cols = op.a.cols(), m = y.cols();
  st.mu_p.noalias() = op.a_sq * st.mu_x;
  st.dense_macs += static_cast<std::uint64_t>(n2 * cols * m);
  for (Index i = 0; i < st.mu_p.size(); ++i) {
    const double v = st.mu_p.data()[i];
    if (!(v >= 0.0))
      throw Error(ErrorKind::numerical_collapse,
                  "mu_p entry " + std::to_string(i) + " = " + std::to_string(v) + " at iteration " +
                      std::to_string(st.iteration));
    st.mu_p.data()[i] = std::max(v, kVarianceFloor);
  }
  if (st.s_hat.rows() != n2 || st.s_hat.cols() != m) st.s_hat = RealMatrix::Zero(n2, m);
  st.p_hat.noalias() = op.a * st.x_hat;
  st.dense_macs += static_cast<std::uint64_t>(n2 * cols * m);
  st.p_hat -= st.mu_p.cwiseProduct(st.s_hat);

  const double s2 = st.sigma2;
  const auto denom = (st.mu_p.array() + s2);
  st.mu_z = (st.mu_p.array() * s2 / denom).matrix();
  st.z_hat = ((st.mu_p.array() * y.array() + s2 * st.p_hat.array()) / denom).matrix();
  // (μ^p - μ^z)/(μ^p)² and (ẑ - p̂)/μ^p, simplified to avoid cancellation.
  st.mu_s = denom.inverse().matrix();
  const RealMatrix s_new = ((y.array() - st.p_hat.array()) / denom).matrix();
  if (damping >= 1.0)
    st.s_hat = s_new;
  else
    st.s_hat = damping * s_new + (1.0 - damping) * st.s_hat;
}

/// Input-node half: μ^r = 1 / (|A|ᵀ μ^s), r̂ = x̂ + μ^r ⊙ (Aᵀ ŝ).
inline void input_node_step(GampState& st, const SensingOperator& op) {
  require(st.s_hat.rows() == op.a.rows() && st.mu_s.rows() == op.a.rows(), ErrorKind::invalid_dimension,
          "input step: residual state does not match operator");
  const Index n2 = op.a.rows(), cols = op.a.cols(), m = st.s_hat.cols();
  st.mu_r.noalias() = op.a_sq.transpose() * st.mu_s;
  st.dense_macs += static_cast<std::uint64_t>(n2 * cols * m);
  st.mu_r = st.mu_r.unaryExpr([](double v) { return 1.0 / std::max(v, kVarianceFloor); });
  st.mu_r = st.mu_r.cwiseMax(kVarianceFloor);
  st.r_hat.noalias() = op.a.transpose() * st.s_hat;
  st.dense_macs += static_cast<std::uint64_t>(n2 * cols * m);
  st.r_hat = st.x_hat + st.mu_r.cwiseProduct(st.r_hat);
}

// ---------------------------------------------------------------------------
// Detection

struct DetectionResult {
  ComplexMatrix estimate;       // 2^J × M
  std::vector<int> active_set;  // 1-based codeword indices, ascending
  double threshold = 0.0;
};

inline double detection_threshold(const Eigen::VectorXd& row_energy, Index antennas, const ThresholdConfig& cfg) {
  switch (cfg.rule) {
    case ThresholdRule::fixed: return cfg.value;
    case ThresholdRule::fixed_fraction: return row_energy.size() ? cfg.fraction * row_energy.maxCoeff() : 0.0;
    case ThresholdRule::null_level: {
      if (row_energy.size() == 0) return 0.0;
      std::vector<double> e(row_energy.data(), row_energy.data() + row_energy.size());
      const std::size_t half = std::max<std::size_t>(1, e.size() / 2);
      std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(half - 1), e.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < half; ++i) sum += e[i];
      const double varrho2 = sum / static_cast<double>(half) / static_cast<double>(antennas);
      return cfg.c * static_cast<double>(antennas) * varrho2;
    }
  }
  return 0.0;
}

/// {i : ‖x_i‖² > υ} with υ from the configured rule. `null_reference` (complex,
/// 2^J × M) supplies the rows the null level is measured on; the estimate itself
/// is used when it is absent.
inline DetectionResult hard_decision(const ComplexMatrix& estimate, const ThresholdConfig& cfg,
                                     const ComplexMatrix* null_reference = nullptr) {
  require(estimate.allFinite(), ErrorKind::invalid_parameter, "estimate contains non-finite values");
  DetectionResult out;
  out.estimate = estimate;
  const Eigen::VectorXd energy = estimate.rowwise().squaredNorm();
  if (cfg.rule == ThresholdRule::null_level && null_reference) {
    require(null_reference->rows() == estimate.rows() && null_reference->cols() == estimate.cols(),
            ErrorKind::invalid_dimension, "null reference shape differs from estimate");
    out.threshold = detection_threshold(null_reference->rowwise().squaredNorm(), estimate.cols(), cfg);
  } else {
    out.threshold = detection_threshold(energy, estimate.cols(), cfg);
  }
  if (cfg.rule == ThresholdRule::null_level && energy.size())
    out.threshold = std::max(out.threshold, cfg.relative_floor * energy.maxCoeff());
  for (Index i = 0; i < energy.size(); ++i)
    if (energy[i] > out.threshold) out.active_set.push_back(static_cast<int>(i) + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Full loop

struct IterationTrace {
  int iteration = 0;
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  double sigma2 = 0.0;
  double lambda = 0.0;
  double residual_norm = 0.0;
  double relative_change = 0.0;
};

using TraceCallback = std::function<void(const IterationTrace&)>;

struct EstimatorOutput {
  DetectionResult detection;
  GampState state;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void check_finite(const RealMatrix& m, const char* what, int iteration) {
  if (!m.allFinite())
    throw Error(ErrorKind::numerical_collapse,
                std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
}

}  // namespace detail

/// One EM-MRF-GAMP iteration in listing order. Returns ‖X̂(t+1) - X̂(t)‖² / ‖X̂(t)‖².
inline double gamp_iteration(GampState& st, const SensingOperator& op, const RealMatrix& y,
                             const UpaGeometry& grid, const GampConfig& cfg, MrfBeliefs& beliefs) {
  ++st.iteration;
  output_node_step(st, op, y, cfg.damping);
  input_node_step(st, op);
  detail::check_finite(st.r_hat, "r_hat", st.iteration);

  const Index rows = st.r_hat.rows(), m = st.r_hat.cols();
  std::vector<LaplaceTerms> terms(static_cast<std::size_t>(rows * m));
  st.varpi.resize(rows, m);
  for (Index i = 0; i < rows * m; ++i) {
    const LaplaceTerms t = laplace_terms(st.r_hat.data()[i], st.mu_r.data()[i], st.lambda);
    terms[static_cast<std::size_t>(i)] = t;
    st.varpi.data()[i] = special::logistic(special::log_add_exp(t.log_i_minus, t.log_i_plus) - t.log_null);
  }

  if (cfg.fixed_rho) {
    st.rho = RealMatrix::Constant(rows, m, std::clamp(*cfg.fixed_rho, 0.0, 1.0));
  } else {
    if (!cfg.mrf_warm_start) beliefs = message_init(rows / 2, grid);
    st.rho = mrf_pass(st.varpi, grid, cfg.mrf, cfg.t_mrf, beliefs);
  }

  st.moments.resize(static_cast<std::size_t>(rows * m));
  RealMatrix x_new(rows, m), mu_x_new(rows, m);
  for (Index i = 0; i < rows * m; ++i) {
    const DenoiserMoments d = denoise_laplacian(terms[static_cast<std::size_t>(i)], st.rho.data()[i]);
    st.moments[static_cast<std::size_t>(i)] = d;
    x_new.data()[i] = d.mean;
    mu_x_new.data()[i] = std::max(d.variance, kVarianceFloor);
  }
  if (cfg.damping < 1.0) {
    x_new = cfg.damping * x_new + (1.0 - cfg.damping) * st.x_hat;
    mu_x_new = cfg.damping * mu_x_new + (1.0 - cfg.damping) * st.mu_x;
  }
  detail::check_finite(x_new, "x_hat", st.iteration);

  if (cfg.learn_sigma2) st.sigma2 = em_update_sigma2(y, st.z_hat, st.mu_z);
  if (cfg.learn_lambda) st.lambda = em_update_lambda(st.rho, st.moments, st.lambda);

  const double prev = st.x_hat.squaredNorm();
  const double change = (x_new - st.x_hat).squaredNorm();
  st.x_hat = std::move(x_new);
  st.mu_x = std::move(mu_x_new);
  return prev > 0.0 ? change / prev : std::numeric_limits<double>::infinity();
}

/// Runs the estimator on a real observation (2N × M). `truth` (2^J × M complex),
/// when given, is only used for the per-iteration NMSE trace.
inline EstimatorOutput run_estimator(const RealMatrix& y, const SensingOperator& op, const UpaGeometry& grid,
                                     const GampConfig& cfg, const TraceCallback& trace = {},
                                     const ComplexMatrix* truth = nullptr) {
  grid.validate();
  require(y.cols() == grid.antennas(), ErrorKind::invalid_dimension, "observation columns must equal M");
  require(y.rows() == op.a.rows(), ErrorKind::invalid_dimension, "observation rows must equal 2N");
  require(op.a.cols() % 2 == 0, ErrorKind::invalid_dimension, "operator needs 2^{J+1} columns");
  require(cfg.t_max >= 1 && cfg.tau > 0.0, ErrorKind::invalid_parameter, "t_max >= 1 and tau > 0 required");
  require(cfg.damping > 0.0 && cfg.damping <= 1.0, ErrorKind::invalid_parameter, "damping must lie in (0, 1]");
  require(y.allFinite(), ErrorKind::numerical_collapse, "observation contains non-finite values");

  EstimatorOutput out;
  out.state = init_state(y, op, cfg);
  MrfBeliefs beliefs = message_init(op.a.cols() / 2, grid);
  const double truth_energy = truth ? truth->squaredNorm() : 0.0;

  for (int t = 1; t <= cfg.t_max; ++t) {
    const double rel = gamp_iteration(out.state, op, y, grid, cfg, beliefs);
    out.iterations = t;
    if (trace) {
      IterationTrace it;
      it.iteration = t;
      it.sigma2 = out.state.sigma2;
      it.lambda = out.state.lambda;
      it.residual_norm = (y - op.a * out.state.x_hat).norm();
      it.relative_change = rel;
      if (truth && truth_energy > 0.0)
        it.nmse_db = 10.0 * std::log10((complexify(out.state.x_hat) - *truth).squaredNorm() / truth_energy);
      trace(it);
    }
    if (rel < cfg.tau) {
      out.converged = true;
      break;
    }
  }
  // Null rows of the pseudo-observation r̂ = x + noise are Gaussian, unlike the shrunk estimate.
  const ComplexMatrix pseudo = complexify(out.state.r_hat);
  out.detection = hard_decision(complexify(out.state.x_hat), cfg.threshold, &pseudo);
  return out;
}

inline EstimatorOutput run_estimator(const SlotObservation& obs, const SlotCodebook& cb, const UpaGeometry& grid,
                                     const GampConfig& cfg, const TraceCallback& trace = {}) {
  const SensingOperator op(cb);
  return run_estimator(obs.real_received, op, grid, cfg, trace, &obs.complex_signal);
}

}  // namespace ura
