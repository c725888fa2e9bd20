// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ura/common.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace ura::verify {

/// Minimum over all K! permutations, each cost summed in row order.
inline double brute_force_assignment_cost(const RealMatrix& cost, std::vector<int>* best = nullptr) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double min_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
    if (c < min_cost) {
      min_cost = c;
      if (best) *best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return min_cost;
}

}  // namespace ura::verify
