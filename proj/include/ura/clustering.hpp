// SPDX-License-Identifier: Apache-2.0
//
// Slot-balanced K-means message stitching.
//
// Each slot contributes K_s magnitude vectors |x_k| (one per detected codeword).
// A round visits slots in order; every slot is matched one-to-one against the
// K_a centroids with the Hungarian solver, and the centroids are refreshed as
// a running mean over the slots visited so far in the round. Slots with fewer
// detections than K_a (codeword collisions) duplicate their worst-fitting rows
// and update through an energy mask of the previous centroid.
#pragma once

#include "ura/codec.hpp"
#include "ura/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace ura {

// ---------------------------------------------------------------------------
// Hungarian solver (shortest augmenting path with potentials, O(K³))

struct HungarianResult {
  std::vector<int> col_of_row;
  double cost = 0.0;  // summed in row order
};

/// Minimum-cost perfect matching on a square cost matrix. On equal reduced costs
/// the lowest column index wins. `relaxations`, when given, accumulates inner-loop steps.
inline HungarianResult hungarian_solve(const RealMatrix& cost, std::uint64_t* relaxations = nullptr) {
  require(cost.rows() == cost.cols(), ErrorKind::invalid_parameter, "assignment cost must be square");
  require(cost.allFinite(), ErrorKind::invalid_parameter, "assignment cost has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  HungarianResult res;
  res.col_of_row.assign(n, -1);
  if (n == 0) return res;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  std::uint64_t steps = 0;
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        ++steps;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) res.col_of_row[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) res.cost += cost(i, res.col_of_row[i]);
  if (relaxations) *relaxations += steps;
  return res;
}

// ---------------------------------------------------------------------------
// Data

struct SlotChannels {
  std::vector<RealMatrix> magnitudes;       // per slot, K_s × M; row k = |x_k|
  std::vector<std::vector<int>> codewords;  // per slot, 1-based codeword behind each row

  int slots() const { return static_cast<int>(magnitudes.size()); }
  int detected(int s) const { return static_cast<int>(magnitudes[static_cast<std::size_t>(s)].rows()); }
  int max_detected() const {
    int k = 0;
    for (int s = 0; s < slots(); ++s) k = std::max(k, detected(s));
    return k;
  }
};

/// Row magnitudes of each slot's estimate restricted to its detected set.
inline SlotChannels collect_slot_channels(const std::vector<ComplexMatrix>& estimates,
                                          const std::vector<std::vector<int>>& active_sets) {
  require(estimates.size() == active_sets.size(), ErrorKind::invalid_dimension,
          "one active set per slot estimate is required");
  SlotChannels sc;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    const auto& est = estimates[s];
    const auto& set = active_sets[s];
    RealMatrix r(static_cast<Index>(set.size()), est.cols());
    for (std::size_t k = 0; k < set.size(); ++k) {
      require(set[k] >= 1 && set[k] <= est.rows(), ErrorKind::invalid_parameter, "active index out of range");
      r.row(static_cast<Index>(k)) = est.row(set[k] - 1).cwiseAbs();
    }
    sc.magnitudes.push_back(std::move(r));
    sc.codewords.push_back(set);
  }
  return sc;
}

struct SlotAssignment {
  std::vector<int> channel_of_group;  // size K_a; row of the slot's data matrix, -1 if the slot is empty
  double cost = 0.0;
  bool collision = false;  // K_s < K_a
};

enum class CentroidInit { first_full_slot, random_full_slot };

struct ClusteringConfig {
  int t_c = 50;
  double zeta = 0.95;
  CentroidInit init = CentroidInit::first_full_slot;
  std::uint64_t seed = 0;  // only used by random_full_slot
};

struct ClusterState {
  RealMatrix centroids;  // K_a × M
  std::vector<SlotAssignment> assignments;
  int round = 0;
  bool converged = false;
  std::uint64_t hungarian_calls = 0;
  std::uint64_t hungarian_relaxations = 0;
  std::uint64_t hungarian_cubic_budget = 0;  // Σ K³ over calls

  int groups() const { return static_cast<int>(centroids.rows()); }
};

// ---------------------------------------------------------------------------
// Steps

/// Euclidean distance matrix (K_s × K_a).
inline RealMatrix distance_matrix(const RealMatrix& channels, const RealMatrix& centroids) {
  require(channels.cols() == centroids.cols(), ErrorKind::invalid_dimension, "channel/centroid length mismatch");
  RealMatrix d(channels.rows(), centroids.rows());
  for (Index k = 0; k < channels.rows(); ++k)
    for (Index g = 0; g < centroids.rows(); ++g) d(k, g) = (channels.row(k) - centroids.row(g)).norm();
  return d;
}

/// Rows to duplicate when K_s < K_a: largest row sums first (ties to the lower
/// row), cycling if more than K_s duplicates are needed.
inline std::vector<int> duplicated_rows(const RealMatrix& d, int k_a) {
  const int k_s = static_cast<int>(d.rows());
  std::vector<int> order(static_cast<std::size_t>(k_s));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd sums = d.rowwise().sum();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sums[a] > sums[b]; });
  std::vector<int> dup;
  for (int i = 0; i < k_a - k_s; ++i) dup.push_back(order[static_cast<std::size_t>(i % k_s)]);
  return dup;
}

inline SlotAssignment assignment_step(const RealMatrix& channels, const RealMatrix& centroids,
                                      ClusterState* counters = nullptr) {
  const int k_s = static_cast<int>(channels.rows());
  const int k_a = static_cast<int>(centroids.rows());
  require(k_s <= k_a, ErrorKind::invalid_state,
          "slot has " + std::to_string(k_s) + " channels but only " + std::to_string(k_a) + " groups");
  SlotAssignment out;
  out.channel_of_group.assign(static_cast<std::size_t>(k_a), -1);
  out.collision = k_s < k_a;
  if (k_s == 0) return out;

  const RealMatrix d = distance_matrix(channels, centroids);
  std::vector<int> physical(static_cast<std::size_t>(k_s));
  std::iota(physical.begin(), physical.end(), 0);
  RealMatrix square(k_a, k_a);
  square.topRows(k_s) = d;
  if (k_s < k_a) {
    const auto dup = duplicated_rows(d, k_a);
    for (std::size_t i = 0; i < dup.size(); ++i) {
      square.row(k_s + static_cast<Index>(i)) = d.row(dup[i]);
      physical.push_back(dup[i]);
    }
  }
  std::uint64_t relax = 0;
  const HungarianResult h = hungarian_solve(square, &relax);
  if (counters) {
    ++counters->hungarian_calls;
    counters->hungarian_relaxations += relax;
    counters->hungarian_cubic_budget += static_cast<std::uint64_t>(k_a) * k_a * k_a;
  }
  for (int row = 0; row < k_a; ++row)
    out.channel_of_group[static_cast<std::size_t>(h.col_of_row[row])] = physical[static_cast<std::size_t>(row)];
  out.cost = h.cost;
  return out;
}

/// Minimal set of top-energy entries of `c` whose energy exceeds ζ‖c‖², as a 0/1 vector.
/// A zero vector keeps every entry.
inline Eigen::VectorXd energy_mask(const Eigen::VectorXd& c, double zeta) {
  const Index m = c.size();
  const double total = c.squaredNorm();
  if (total <= 0.0) return Eigen::VectorXd::Ones(m);
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return c[a] * c[a] > c[b] * c[b]; });
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(m);
  double acc = 0.0;
  for (Index i : order) {
    mask[i] = 1.0;
    acc += c[i] * c[i];
    if (acc > zeta * total) break;
  }
  return mask;
}

/// Running-mean update for step s (1-based). In collision slots every group's
/// incoming vector is masked by the energy support of its previous centroid.
inline void centroid_update(RealMatrix& centroids, const SlotAssignment& a, const RealMatrix& channels, int s,
                            double zeta) {
  require(s >= 1, ErrorKind::invalid_parameter, "step index must be >= 1");
  require(zeta > 0.0 && zeta < 1.0, ErrorKind::invalid_parameter, "zeta must lie in (0, 1)");
  require(static_cast<Index>(a.channel_of_group.size()) == centroids.rows(), ErrorKind::invalid_dimension,
          "assignment does not cover every group");
  const double w = 1.0 / s;
  for (Index g = 0; g < centroids.rows(); ++g) {
    const int k = a.channel_of_group[static_cast<std::size_t>(g)];
    if (k < 0) continue;
    Eigen::VectorXd r = channels.row(k).transpose();
    if (a.collision) r = r.cwiseProduct(energy_mask(centroids.row(g).transpose(), zeta));
    centroids.row(g) = w * ((s - 1) * centroids.row(g) + r.transpose());
  }
}

// ---------------------------------------------------------------------------
// Full loop

inline ClusterState run_clustering(const SlotChannels& data, const ClusteringConfig& cfg = {}) {
  require(cfg.t_c >= 1, ErrorKind::invalid_parameter, "T_c must be >= 1");
  const int k_a = data.max_detected();
  require(k_a >= 1, ErrorKind::empty_output, "no slot contains a detected channel");
  const int slots = data.slots();
  const Index m = data.magnitudes.front().cols();
  for (int s = 0; s < slots; ++s)
    require(data.magnitudes[static_cast<std::size_t>(s)].cols() == m || data.detected(s) == 0,
            ErrorKind::invalid_dimension, "slots disagree on the antenna count");

  std::vector<int> full;
  for (int s = 0; s < slots; ++s)
    if (data.detected(s) == k_a) full.push_back(s);
  int init_slot = full.front();
  if (cfg.init == CentroidInit::random_full_slot) {
    std::mt19937_64 rng(cfg.seed);
    init_slot = full[std::uniform_int_distribution<std::size_t>(0, full.size() - 1)(rng)];
  }

  ClusterState st;
  st.centroids = data.magnitudes[static_cast<std::size_t>(init_slot)];
  std::vector<SlotAssignment> previous;
  for (int t = 1; t <= cfg.t_c; ++t) {
    st.round = t;
    std::vector<SlotAssignment> current;
    current.reserve(static_cast<std::size_t>(slots));
    for (int s = 0; s < slots; ++s) {
      const RealMatrix& r = data.magnitudes[static_cast<std::size_t>(s)];
      SlotAssignment a = assignment_step(r, st.centroids, &st);
      centroid_update(st.centroids, a, r, s + 1, cfg.zeta);
      current.push_back(std::move(a));
    }
    const bool same = !previous.empty() && std::equal(current.begin(), current.end(), previous.begin(),
                                                      [](const SlotAssignment& x, const SlotAssignment& y) {
                                                        return x.channel_of_group == y.channel_of_group;
                                                      });
    previous = std::move(current);
    if (same || slots == 1) {
      st.converged = true;
      break;
    }
  }
  st.assignments = std::move(previous);
  return st;
}

// ---------------------------------------------------------------------------
// Stitching

/// member[g][s]: row of slot s assigned to group g, or -1.
using Partition = std::vector<std::vector<int>>;

inline Partition partition_of(const ClusterState& st) {
  Partition p(static_cast<std::size_t>(st.groups()), std::vector<int>(st.assignments.size(), -1));
  for (std::size_t s = 0; s < st.assignments.size(); ++s)
    for (int g = 0; g < st.groups(); ++g)
      p[static_cast<std::size_t>(g)][s] = st.assignments[s].channel_of_group[static_cast<std::size_t>(g)];
  return p;
}

struct StitchedMessages {
  std::vector<std::vector<int>> codeword_sequences;  // per group, S one-based indices
  std::vector<Bits> payloads;
};

inline StitchedMessages stitch_messages(const Partition& partition, const SlotChannels& data, int j_bits,
                                        int payload_bits) {
  StitchedMessages out;
  for (std::size_t g = 0; g < partition.size(); ++g) {
    const auto& members = partition[g];
    require(static_cast<int>(members.size()) == data.slots(), ErrorKind::malformed_partition,
            "group " + std::to_string(g) + " does not span every slot");
    std::vector<int> seq;
    for (int s = 0; s < data.slots(); ++s) {
      const int k = members[static_cast<std::size_t>(s)];
      if (k < 0 || k >= data.detected(s))
        throw Error(ErrorKind::malformed_partition,
                    "group " + std::to_string(g) + " has no member in slot " + std::to_string(s + 1));
      seq.push_back(data.codewords[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]);
    }
    out.payloads.push_back(assemble_message(seq, j_bits, payload_bits));
    out.codeword_sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace ura
