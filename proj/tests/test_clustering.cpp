// SPDX-License-Identifier: Apache-2.0
#include "ura/clustering.hpp"
#include "ura/io.hpp"
#include "ura/verify/assignment.hpp"

#include "test_util.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace ura;

namespace {

RealMatrix uniform_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealMatrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// K users with well separated magnitude profiles, S slots, rows shuffled per slot.
struct Planted {
  SlotChannels data;
  std::vector<std::vector<int>> row_of_user;  // [slot][user]
};

Planted planted(int k, int slots, int m, std::mt19937_64& rng, double jitter = 0.02) {
  std::normal_distribution<double> g(0.0, jitter);
  RealMatrix base = RealMatrix::Zero(k, m);
  for (int u = 0; u < k; ++u) base(u, (u * m) / k) = 1.0, base(u, ((u * m) / k + 1) % m) = 0.5;
  Planted p;
  for (int s = 0; s < slots; ++s) {
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    RealMatrix r(k, m);
    std::vector<int> cw(static_cast<std::size_t>(k)), row_of(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      const int u = perm[static_cast<std::size_t>(i)];
      for (int c = 0; c < m; ++c) r(i, c) = std::abs(base(u, c) + g(rng));
      cw[static_cast<std::size_t>(i)] = 10 * u + s + 1;
      row_of[static_cast<std::size_t>(u)] = i;
    }
    p.data.magnitudes.push_back(r);
    p.data.codewords.push_back(cw);
    p.row_of_user.push_back(row_of);
  }
  return p;
}

}  // namespace

TEST(Hungarian, SmallExample) {
  RealMatrix c(3, 3);
  c << 4, 1, 3,
       2, 0, 5,
       3, 2, 2;
  const HungarianResult h = hungarian_solve(c);
  EXPECT_EQ(h.col_of_row, (std::vector<int>{1, 0, 2}));
  EXPECT_DOUBLE_EQ(h.cost, 5.0);
}

TEST(Hungarian, TieGoesToLowestColumn) {
  const HungarianResult h = hungarian_solve(RealMatrix::Zero(3, 3));
  EXPECT_EQ(h.col_of_row, (std::vector<int>{0, 1, 2}));
}

TEST(Hungarian, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int k = 1; k <= 7; ++k)
    for (int rep = 0; rep < 30; ++rep) {
      const RealMatrix c = uniform_matrix(k, k, rng);
      EXPECT_NEAR(hungarian_solve(c).cost, verify::brute_force_assignment_cost(c), 1e-12);
    }
}

TEST(Hungarian, Errors) {
  EXPECT_URA_ERROR(hungarian_solve(RealMatrix::Zero(2, 3)), ErrorKind::invalid_parameter);
  RealMatrix c = RealMatrix::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_URA_ERROR(hungarian_solve(c), ErrorKind::invalid_parameter);
}

TEST(Assignment, DuplicatesLargestRowSum) {
  RealMatrix d(2, 3);
  d << 1, 1, 1,
       2, 3, 4;
  EXPECT_EQ(duplicated_rows(d, 3), std::vector<int>{1});
  EXPECT_EQ(duplicated_rows(d, 5), (std::vector<int>{1, 0, 1}));
}

TEST(Assignment, CollisionSlotCoversEveryGroup) {
  RealMatrix centroids(3, 2), channels(2, 2);
  centroids << 1, 0,
               0, 1,
               1, 1;
  channels << 1, 0,
              0.1, 1;
  const SlotAssignment a = assignment_step(channels, centroids);
  EXPECT_TRUE(a.collision);
  EXPECT_EQ(a.channel_of_group[0], 0);
  EXPECT_EQ(a.channel_of_group[1], 1);
  EXPECT_GE(a.channel_of_group[2], 0);
}

TEST(Assignment, OptimalOverDuplicatedSquare) {
  std::mt19937_64 rng(2);
  for (int k_a = 1; k_a <= 6; ++k_a)
    for (int k_s = 1; k_s <= k_a; ++k_s)
      for (int rep = 0; rep < 10; ++rep) {
        const RealMatrix centroids = uniform_matrix(k_a, 4, rng), channels = uniform_matrix(k_s, 4, rng);
        const SlotAssignment a = assignment_step(channels, centroids);
        const RealMatrix d = distance_matrix(channels, centroids);
        RealMatrix sq(k_a, k_a);
        sq.topRows(k_s) = d;
        const auto dup = duplicated_rows(d, k_a);
        for (std::size_t i = 0; i < dup.size(); ++i) sq.row(k_s + static_cast<Index>(i)) = d.row(dup[i]);
        EXPECT_NEAR(a.cost, verify::brute_force_assignment_cost(sq), 1e-12);
        // Constraint I: one channel per group. Constraint II: every channel used.
        std::set<int> used;
        for (int c : a.channel_of_group) {
          EXPECT_GE(c, 0);
          used.insert(c);
        }
        EXPECT_EQ(static_cast<int>(used.size()), k_s);
      }
}

TEST(Assignment, MoreChannelsThanGroupsIsAnError) {
  EXPECT_URA_ERROR(assignment_step(RealMatrix::Zero(3, 2), RealMatrix::Zero(2, 2)), ErrorKind::invalid_state);
}

TEST(Assignment, EmptySlot) {
  const SlotAssignment a = assignment_step(RealMatrix::Zero(0, 2), RealMatrix::Zero(2, 2));
  EXPECT_EQ(a.channel_of_group, (std::vector<int>{-1, -1}));
}

TEST(EnergyMask, SortAndScan) {
  Eigen::VectorXd c(4);
  c << 0.1, 3.0, 1.0, 0.2;
  // Energies 0.01, 9, 1, 0.04 of 10.05; 9 < 0.95·10.05 < 10.
  EXPECT_EQ(energy_mask(c, 0.95), (Eigen::VectorXd(4) << 0, 1, 1, 0).finished());
  EXPECT_EQ(energy_mask(c, 0.5), (Eigen::VectorXd(4) << 0, 1, 0, 0).finished());
  EXPECT_EQ(energy_mask(Eigen::VectorXd::Zero(3), 0.9), Eigen::VectorXd::Ones(3));
}

TEST(CentroidUpdate, RunningMean) {
  RealMatrix centroids(2, 2), channels(2, 2);
  centroids << 1, 1,
               2, 2;
  channels << 3, 3,
              0, 0;
  SlotAssignment a;
  a.channel_of_group = {1, 0};
  centroid_update(centroids, a, channels, 2, 0.95);
  EXPECT_EQ(centroids, (RealMatrix(2, 2) << 0.5, 0.5, 2.5, 2.5).finished());
}

TEST(CentroidUpdate, CollisionMasksIncoming) {
  RealMatrix centroids(1, 3), channels(1, 3);
  centroids << 1, 0, 0;
  channels << 4, 4, 4;
  SlotAssignment a;
  a.channel_of_group = {0};
  a.collision = true;
  centroid_update(centroids, a, channels, 2, 0.95);
  EXPECT_EQ(centroids, (RealMatrix(1, 3) << 2.5, 0, 0).finished());
}

TEST(CentroidUpdate, Errors) {
  RealMatrix c = RealMatrix::Zero(2, 2);
  SlotAssignment a;
  a.channel_of_group = {0, 1};
  EXPECT_URA_ERROR(centroid_update(c, a, c, 0, 0.9), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(centroid_update(c, a, c, 1, 1.0), ErrorKind::invalid_parameter);
  a.channel_of_group = {0};
  EXPECT_URA_ERROR(centroid_update(c, a, c, 1, 0.9), ErrorKind::invalid_dimension);
}

TEST(RunClustering, SingleSlotIsIdentity) {
  std::mt19937_64 rng(3);
  const Planted p = planted(4, 1, 6, rng);
  const ClusterState st = run_clustering(p.data);
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.round, 1);
  EXPECT_EQ(st.assignments[0].channel_of_group, (std::vector<int>{0, 1, 2, 3}));
}

TEST(RunClustering, RecoversPlantedUsers) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Planted p = planted(2 + rep % 5, 3, 8, rng);
    const ClusterState st = run_clustering(p.data);
    const Partition part = partition_of(st);
    // Each group must follow one user through every slot.
    for (const auto& members : part) {
      int user = -1;
      for (int s = 0; s < 3; ++s) {
        const auto& row_of = p.row_of_user[static_cast<std::size_t>(s)];
        const int u = static_cast<int>(std::find(row_of.begin(), row_of.end(), members[static_cast<std::size_t>(s)]) -
                                       row_of.begin());
        if (s == 0) user = u;
        EXPECT_EQ(u, user);
      }
    }
    const StitchedMessages m = stitch_messages(part, p.data, 8, 24);
    std::set<std::vector<int>> seqs(m.codeword_sequences.begin(), m.codeword_sequences.end());
    EXPECT_EQ(static_cast<int>(seqs.size()), st.groups());
  }
}

TEST(RunClustering, CollisionSharesChannel) {
  std::mt19937_64 rng(5);
  Planted p = planted(3, 3, 9, rng, 0.0);
  // Users 0 and 1 picked the same codeword in slot 2: one superposed row.
  RealMatrix& r = p.data.magnitudes[1];
  const auto& row_of = p.row_of_user[1];
  RealMatrix merged(2, 9);
  merged.row(0) = r.row(row_of[0]) + r.row(row_of[1]);
  merged.row(1) = r.row(row_of[2]);
  r = merged;
  p.data.codewords[1] = {77, 21};
  const ClusterState st = run_clustering(p.data);
  ASSERT_EQ(st.groups(), 3);
  EXPECT_TRUE(st.assignments[1].collision);
  const StitchedMessages m = stitch_messages(partition_of(st), p.data, 8, 24);
  int shared = 0;
  for (const auto& seq : m.codeword_sequences) shared += seq[1] == 77;
  EXPECT_EQ(shared, 2);
}

TEST(RunClustering, RelaxationsWithinCubicBudget) {
  std::mt19937_64 rng(6);
  const Planted p = planted(12, 4, 16, rng, 0.2);
  const ClusterState st = run_clustering(p.data);
  EXPECT_GT(st.hungarian_calls, 0u);
  EXPECT_LE(st.hungarian_relaxations, 2 * st.hungarian_cubic_budget);
}

TEST(RunClustering, Errors) {
  SlotChannels empty;
  empty.magnitudes = {RealMatrix::Zero(0, 4)};
  empty.codewords = {{}};
  EXPECT_URA_ERROR(run_clustering(empty), ErrorKind::empty_output);
  ClusteringConfig cfg;
  cfg.t_c = 0;
  EXPECT_URA_ERROR(run_clustering(empty, cfg), ErrorKind::invalid_parameter);
}

TEST(Stitch, AssemblesInSlotOrder) {
  SlotChannels d;
  d.magnitudes = {RealMatrix::Zero(2, 1), RealMatrix::Zero(2, 1)};
  d.codewords = {{6, 1}, {7, 8}};
  const StitchedMessages m = stitch_messages({{0, 1}, {1, 0}}, d, 3, 5);
  EXPECT_EQ(m.codeword_sequences[0], (std::vector<int>{6, 8}));
  EXPECT_EQ(m.payloads[0], (Bits{1, 0, 1, 1, 1}));
  EXPECT_EQ(m.payloads[1], (Bits{0, 0, 0, 1, 1}));
}

TEST(Stitch, MalformedPartition) {
  SlotChannels d;
  d.magnitudes = {RealMatrix::Zero(1, 1), RealMatrix::Zero(1, 1)};
  d.codewords = {{1}, {2}};
  EXPECT_URA_ERROR(stitch_messages({{0}}, d, 3, 6), ErrorKind::malformed_partition);
  EXPECT_URA_ERROR(stitch_messages({{0, -1}}, d, 3, 6), ErrorKind::malformed_partition);
  EXPECT_URA_ERROR(stitch_messages({{0, 1}}, d, 3, 6), ErrorKind::malformed_partition);
}

TEST(PartitionCsv, RowsPerAssignedChannel) {
  std::mt19937_64 rng(7);
  const Planted p = planted(2, 2, 4, rng);
  const ClusterState st = run_clustering(p.data);
  std::stringstream out;
  io::write_partition_csv(out, st, p.data);
  std::string line;
  int lines = 0;
  std::getline(out, line);
  EXPECT_EQ(line, "group,slot,codeword,distance");
  while (std::getline(out, line)) ++lines;
  EXPECT_EQ(lines, 4);
}
