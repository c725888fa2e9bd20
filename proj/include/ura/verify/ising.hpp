// SPDX-License-Identifier: Apache-2.0
//
// Exhaustive marginals of the single-row Ising support model on a small grid.
#pragma once

#include "ura/channel_model.hpp"
#include "ura/common.hpp"

#include <cmath>
#include <vector>

namespace ura::verify {

/// Joint over b ∈ {-1, 1}^M on the m_v × m_h grid (4-neighbour edges, each counted once):
///   p(b) ∝ Π_m ψ_m(b_m) e^{-α b_m} · Π_{(m,k)} e^{β b_m b_k}
/// where ψ_m(+1) = ϖ_re ϖ_im and ψ_m(-1) = (1-ϖ_re)(1-ϖ_im).
/// Returns the extrinsic activity beliefs the MRF stage reports: for the real
/// row at node m, P(b_m = 1) with ϖ_re at m removed from the evidence, and
/// likewise for the imaginary row. Output layout matches varpi (2 × M).
inline RealMatrix ising_extrinsic_marginals(const RealMatrix& varpi, const UpaGeometry& g, double alpha, double beta) {
  const int m = g.antennas();
  require(varpi.rows() == 2 && varpi.cols() == m, ErrorKind::invalid_dimension, "expects a 2 × M varpi block");
  require(m <= 20, ErrorKind::resource_limit, "brute force limited to 20 nodes");
  std::vector<std::pair<int, int>> edges;
  for (int node = 0; node < m; ++node) {
    const int row = node % g.m_v, col = node / g.m_v;
    if (row + 1 < g.m_v) edges.emplace_back(node, node + 1);
    if (col + 1 < g.m_h) edges.emplace_back(node, node + g.m_v);
  }
  RealMatrix out(2, m);
  for (int target = 0; target < m; ++target) {
    for (int part = 0; part < 2; ++part) {
      double on = 0.0, total = 0.0;
      for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
        double logw = 0.0;
        for (int node = 0; node < m; ++node) {
          const bool active = (mask >> node) & 1ul;
          const double b = active ? 1.0 : -1.0;
          logw += -alpha * b;
          for (int q = 0; q < 2; ++q) {
            if (node == target && q == part) continue;
            const double w = varpi(q, node);
            logw += std::log(active ? w : 1.0 - w);
          }
        }
        for (const auto& [a, c] : edges) {
          const double ba = ((mask >> a) & 1ul) ? 1.0 : -1.0;
          const double bc = ((mask >> c) & 1ul) ? 1.0 : -1.0;
          logw += beta * ba * bc;
        }
        const double w = std::exp(logw);
        total += w;
        if ((mask >> target) & 1ul) on += w;
      }
      out(part, target) = on / total;
    }
  }
  return out;
}

}  // namespace ura::verify
