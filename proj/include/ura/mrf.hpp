// SPDX-License-Identifier: Apache-2.0
//
// Ising-model support refinement on the m_v × m_h antenna grid.
//
// Every codeword row j' owns a binary support field b_{j'm} coupled to its four
// grid neighbours. GAMP supplies per-entry activity evidence ϖ for the real and
// imaginary rows (j', j' + 2^J); loopy belief propagation returns the extrinsic
// activity belief ρ that feeds the Bernoulli-Laplacian denoiser.
//
// Messages κ are kept as log-odds L = log(κ / (1 - κ)). The neighbour update
//
//   κ = [P⁺ e^{β} + P⁻ e^{-β}] / [(e^{β} + e^{-β}) (P⁺ + P⁻)]
//
// then becomes L = log((e^{-β} + e^{u+β}) / (e^{β} + e^{u-β})) = 2 atanh(tanh β · tanh(u/2))
// with u the sender's cavity log-odds, which never overflows.
#pragma once

#include "ura/channel_model.hpp"
#include "ura/common.hpp"
#include "ura/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>

namespace ura {

enum Direction : int { kLeft = 0, kRight = 1, kTop = 2, kBottom = 3 };
inline constexpr std::array<Direction, 4> kDirections{kLeft, kRight, kTop, kBottom};

inline Direction opposite(Direction d) {
  switch (d) {
    case kLeft: return kRight;
    case kRight: return kLeft;
    case kTop: return kBottom;
    case kBottom: return kTop;
  }
  return kLeft;
}

/// Antenna m (0-based) sits at grid row m mod m_v and column m / m_v.
/// Returns the neighbour index in direction d, or -1 at an edge.
inline int grid_neighbor(int m, Direction d, const UpaGeometry& g) {
  const int row = m % g.m_v;
  const int col = m / g.m_v;
  switch (d) {
    case kLeft: return col > 0 ? m - g.m_v : -1;
    case kRight: return col + 1 < g.m_h ? m + g.m_v : -1;
    case kTop: return row > 0 ? m - 1 : -1;
    case kBottom: return row + 1 < g.m_v ? m + 1 : -1;
  }
  return -1;
}

struct MrfParams {
  double alpha = 0.4;
  double beta = 0.4;
  // Optional per-codeword-row overrides (length 2^J).
  std::optional<RealVector> alpha_rows;
  std::optional<RealVector> beta_rows;
};

/// Directional message field κ^d_{j'm}, stored as log-odds, one (2^J × M) matrix per direction.
struct MrfBeliefs {
  UpaGeometry grid;
  std::array<RealMatrix, 4> log_odds;

  Index rows() const { return log_odds[0].rows(); }
  double kappa(Direction d, Index row, Index m) const { return special::logistic(log_odds[d](row, m)); }
};

/// Uniform κ = 0.5 field.
inline MrfBeliefs message_init(Index codeword_rows, const UpaGeometry& grid) {
  grid.validate();
  MrfBeliefs b;
  b.grid = grid;
  for (auto& l : b.log_odds) l = RealMatrix::Zero(codeword_rows, grid.antennas());
  return b;
}

namespace detail {

inline constexpr double kVarpiClamp = 1e-15;

inline RealMatrix logit_clamped(const RealMatrix& p) {
  return p.unaryExpr([](double v) {
    const double c = std::clamp(v, kVarpiClamp, 1.0 - kVarpiClamp);
    return std::log(c) - std::log1p(-c);
  });
}

}  // namespace detail

using MrfRoundCallback = std::function<void(int round, const MrfBeliefs&)>;

/// Runs `t_mrf` synchronous rounds starting from (and updating) `beliefs`, then
/// returns ρ (2^{J+1} × M). Row j of ρ uses the partner row q = j ± 2^J of ϖ.
inline RealMatrix mrf_pass(const RealMatrix& varpi, const UpaGeometry& grid, const MrfParams& params,
                           int t_mrf, MrfBeliefs& beliefs, const MrfRoundCallback& on_round = {}) {
  grid.validate();
  require(varpi.cols() == grid.antennas(), ErrorKind::invalid_dimension,
          "varpi has " + std::to_string(varpi.cols()) + " columns but the grid has " +
              std::to_string(grid.antennas()) + " antennas");
  require(varpi.rows() % 2 == 0 && varpi.rows() > 0, ErrorKind::invalid_dimension,
          "varpi needs an even, non-zero row count");
  require(t_mrf >= 0, ErrorKind::invalid_parameter, "t_mrf must be non-negative");
  const Index half = varpi.rows() / 2;
  const int m_total = grid.antennas();
  require(beliefs.rows() == half && beliefs.log_odds[0].cols() == m_total, ErrorKind::invalid_dimension,
          "message field does not match varpi");

  Eigen::ArrayXd alpha = Eigen::ArrayXd::Constant(half, params.alpha);
  Eigen::ArrayXd beta = Eigen::ArrayXd::Constant(half, params.beta);
  if (params.alpha_rows) {
    require(params.alpha_rows->size() == half, ErrorKind::invalid_dimension, "alpha_rows length");
    alpha = params.alpha_rows->array();
  }
  if (params.beta_rows) {
    require(params.beta_rows->size() == half, ErrorKind::invalid_dimension, "beta_rows length");
    beta = params.beta_rows->array();
  }

  const RealMatrix lw = detail::logit_clamped(varpi);
  // Node self-evidence: both coupled rows plus the sparsity factor e^{-α b}.
  RealMatrix node(half, m_total);
  for (Index m = 0; m < m_total; ++m)
    node.col(m) = (lw.col(m).head(half).array() + lw.col(m).tail(half).array() - 2.0 * alpha).matrix();

  std::vector<std::array<int, 4>> nbr(static_cast<std::size_t>(m_total));
  for (int m = 0; m < m_total; ++m)
    for (Direction d : kDirections) nbr[m][d] = grid_neighbor(m, d, grid);

  std::array<RealMatrix, 4> next = beliefs.log_odds;
  // tanh form of the update: L = log((1 + t y) / (1 - t y)), t = tanh β, y = tanh(u/2).
  const Eigen::ArrayXd t_beta = beta.tanh().min(1.0 - 1e-16).max(-1.0 + 1e-16);
  RealMatrix total(half, m_total);
  RealMatrix cavity(half, m_total);
  for (int round = 1; round <= t_mrf; ++round) {
    total = node;
    for (Direction d : kDirections) total += beliefs.log_odds[d];
    for (Direction d : kDirections) {
      const Direction back = opposite(d);
      // Sender's cavity: everything except the message it received from m.
      for (int m = 0; m < m_total; ++m) {
        const int sender = nbr[m][d];
        if (sender < 0)
          cavity.col(m).setZero();
        else
          cavity.col(m) = total.col(sender) - beliefs.log_odds[back].col(sender);
      }
      RealMatrix& out = next[d];
      // With e = exp(-u): (1 + t y) / (1 - t y) = (1 + e + t(1 - e)) / (1 + e - t(1 - e)).
      const Eigen::ArrayXXd e = (-cavity.array().cwiseMax(-40.0).cwiseMin(40.0)).exp();
      const Eigen::ArrayXXd te = (1.0 - e).colwise() * t_beta;
      out = ((1.0 + e + te) / (1.0 + e - te)).log().matrix();
      for (int m = 0; m < m_total; ++m)
        if (nbr[m][d] < 0) out.col(m).setZero();
    }
    std::swap(beliefs.log_odds, next);
    if (on_round) on_round(round, beliefs);
  }

  RealMatrix rho(varpi.rows(), m_total);
  for (int m = 0; m < m_total; ++m) {
    Eigen::ArrayXd msg = Eigen::ArrayXd::Zero(half);
    for (Direction d : kDirections)
      if (nbr[m][d] >= 0) msg += beliefs.log_odds[d].col(m).array();
    const Eigen::ArrayXd base = msg - 2.0 * alpha;
    for (Index j = 0; j < half; ++j) {
      rho(j, m) = std::clamp(special::logistic(base[j] + lw(j + half, m)), detail::kVarpiClamp,
                             1.0 - detail::kVarpiClamp);
      rho(j + half, m) = std::clamp(special::logistic(base[j] + lw(j, m)), detail::kVarpiClamp,
                                    1.0 - detail::kVarpiClamp);
    }
  }
  return rho;
}

/// Cold-start convenience overload.
inline RealMatrix mrf_pass(const RealMatrix& varpi, const UpaGeometry& grid, const MrfParams& params,
                           int t_mrf) {
  MrfBeliefs b = message_init(varpi.rows() / 2, grid);
  return mrf_pass(varpi, grid, params, t_mrf, b);
}

}  // namespace ura
