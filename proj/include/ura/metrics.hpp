// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ura/codec.hpp"
#include "ura/common.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ura {

inline constexpr double kNmseFloorDb = -150.0;

/// 10 log10(‖truth - estimate‖² / ‖truth‖²), floored at -150 dB.
inline double nmse(const ComplexMatrix& truth, const ComplexMatrix& estimate) {
  require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(), ErrorKind::invalid_dimension,
          "nmse: shape mismatch");
  const double ref = truth.squaredNorm();
  require(ref > 0.0, ErrorKind::undefined_metric, "nmse: reference has zero energy");
  const double ratio = (truth - estimate).squaredNorm() / ref;
  if (ratio <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

/// NMSE over the rows listed in `rows` (1-based), i.e. the detected set.
inline double nmse(const ComplexMatrix& truth, const ComplexMatrix& estimate, const std::vector<int>& rows) {
  ComplexMatrix t(static_cast<Index>(rows.size()), truth.cols());
  ComplexMatrix e(static_cast<Index>(rows.size()), estimate.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 1 && rows[i] <= truth.rows() && rows[i] <= estimate.rows(), ErrorKind::invalid_parameter,
            "nmse: row index out of range");
    t.row(static_cast<Index>(i)) = truth.row(rows[i] - 1);
    e.row(static_cast<Index>(i)) = estimate.row(rows[i] - 1);
  }
  return nmse(t, e);
}

struct ErrorRates {
  double p_md = 0.0;
  double p_fa = 0.0;
  double p_e = 0.0;
};

/// Identical payloads count once on either side.
inline ErrorRates error_rates(const std::vector<Bits>& transmitted, const std::vector<Bits>& recovered) {
  require(!transmitted.empty(), ErrorKind::invalid_parameter, "error rates need at least one transmitted message");
  const std::set<Bits> tx(transmitted.begin(), transmitted.end());
  const std::set<Bits> rx(recovered.begin(), recovered.end());
  std::size_t missed = 0, bogus = 0;
  for (const auto& b : tx)
    if (!rx.count(b)) ++missed;
  for (const auto& b : rx)
    if (!tx.count(b)) ++bogus;
  ErrorRates r;
  r.p_md = static_cast<double>(missed) / static_cast<double>(tx.size());
  r.p_fa = rx.empty() ? 0.0 : static_cast<double>(bogus) / static_cast<double>(rx.size());
  r.p_e = r.p_md + r.p_fa;
  return r;
}

/// Γ̄(M, υ/ϱ²)/Γ(M): probability that a null row x̂ = ϱ v, v ~ CN(0, I_M),
/// exceeds the energy threshold υ.
inline double pupe_analytic(int m, double upsilon, double varrho2) {
  require(m >= 1, ErrorKind::invalid_parameter, "pupe: antenna count must be >= 1");
  require(upsilon >= 0.0 && std::isfinite(upsilon), ErrorKind::invalid_parameter, "pupe: threshold must be >= 0");
  require(varrho2 > 0.0 && std::isfinite(varrho2), ErrorKind::invalid_parameter, "pupe: varrho2 must be > 0");
  if (upsilon == 0.0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(m), upsilon / varrho2);
}

// ---------------------------------------------------------------------------
// Trial bookkeeping

inline constexpr int kTrialSchemaVersion = 1;

struct TrialRecord {
  std::map<std::string, std::string> config;  // snapshot of the effective configuration
  std::uint64_t seed = 0;
  std::vector<double> nmse_db;  // per slot, NaN when undefined
  double nmse_db_mean = std::numeric_limits<double>::quiet_NaN();
  double p_md = 0.0;
  double p_fa = 0.0;
  double p_e = 0.0;
  int k_active = 0;
  int k_detected = 0;  // K_a estimated by the clustering stage
  int recovered = 0;
  int gamp_iterations = 0;  // summed over slots
  int cluster_rounds = 0;
  double spectral_efficiency = 0.0;
  std::string status = "ok";
  double runtime_ms = 0.0;
};

/// Neumaier-compensated running sum with mean / standard error.
class Accumulator {
 public:
  void add(double x) {
    if (!std::isfinite(x)) {
      ++skipped_;
      return;
    }
    ++n_;
    kahan(sum_, c_, x);
    kahan(sq_, cq_, x * x);
  }
  std::size_t count() const { return n_; }
  std::size_t skipped() const { return skipped_; }
  double mean() const { return n_ ? (sum_ + c_) / static_cast<double>(n_) : std::numeric_limits<double>::quiet_NaN(); }
  double standard_error() const {
    if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(n_);
    const double mu = mean();
    const double var = std::max(0.0, ((sq_ + cq_) - n * mu * mu) / (n - 1.0));
    return std::sqrt(var / n);
  }

 private:
  static void kahan(double& sum, double& comp, double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  std::size_t n_ = 0, skipped_ = 0;
  double sum_ = 0.0, c_ = 0.0, sq_ = 0.0, cq_ = 0.0;
};

}  // namespace ura
