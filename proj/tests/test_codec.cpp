// SPDX-License-Identifier: Apache-2.0
#include "ura/codec.hpp"
#include "ura/io.hpp"

#include "test_util.hpp"

#include <random>
#include <sstream>

using namespace ura;

namespace {

ComplexVector random_channel(Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 / m));
  ComplexVector h(m);
  for (Index i = 0; i < m; ++i) {
    const double re = g(rng);
    h[i] = cplx(re, g(rng));
  }
  return h;
}

}  // namespace

TEST(Codebook, DeterministicUnderSeed) {
  const SlotCodebook a = build_codebook(32, 6, 11), b = build_codebook(32, 6, 11), c = build_codebook(32, 6, 12);
  EXPECT_TRUE(a.complex_matrix == b.complex_matrix);
  EXPECT_FALSE(a.complex_matrix == c.complex_matrix);
}

TEST(Codebook, ColumnEnergyNearOne) {
  const SlotCodebook cb = build_codebook(100, 8, 5);
  const double mean = cb.complex_matrix.colwise().squaredNorm().mean();
  EXPECT_GE(mean, 0.95);
  EXPECT_LE(mean, 1.05);
}

TEST(Codebook, RealEmbeddingLayout) {
  const SlotCodebook cb = build_codebook(8, 3, 2);
  ASSERT_EQ(cb.real_matrix.rows(), 16);
  ASSERT_EQ(cb.real_matrix.cols(), 16);
  EXPECT_TRUE(cb.real_matrix.topLeftCorner(8, 8) == cb.complex_matrix.real());
  EXPECT_TRUE(cb.real_matrix.topRightCorner(8, 8) == -cb.complex_matrix.imag());
  EXPECT_TRUE(cb.real_matrix.bottomLeftCorner(8, 8) == cb.complex_matrix.imag());
  EXPECT_TRUE(cb.real_matrix.bottomRightCorner(8, 8) == cb.complex_matrix.real());
}

TEST(Codebook, RejectsBadSizes) {
  EXPECT_URA_ERROR(build_codebook(0, 4, 1), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(build_codebook(4, 0, 1), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(build_codebook(4, 24, 1), ErrorKind::resource_limit);
}

TEST(Embedding, OperatorMatchesComplexProduct) {
  std::mt19937_64 rng(3);
  const SlotCodebook cb = build_codebook(12, 4, 9);
  ComplexMatrix x(16, 5);
  for (Index c = 0; c < 5; ++c) x.col(c) = random_channel(16, rng);
  const RealMatrix lhs = cb.real_matrix * realify(x);
  EXPECT_LT((lhs - realify(cb.complex_matrix * x)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Embedding, RoundTripAndNorm) {
  std::mt19937_64 rng(4);
  ComplexMatrix x(6, 3);
  for (Index c = 0; c < 3; ++c) x.col(c) = random_channel(6, rng);
  const RealMatrix r = realify(x);
  EXPECT_TRUE(complexify(r) == x);
  EXPECT_NEAR(r.squaredNorm(), x.squaredNorm(), 1e-15);
}

TEST(Embedding, OddRowsRejected) { EXPECT_URA_ERROR(complexify(RealMatrix::Zero(3, 2)), ErrorKind::invalid_dimension); }

TEST(Fragments, NinetySixBitsInTwelveBitFragments) {
  Bits b(96, 0);
  const auto idx = fragment_message(b, 12);
  ASSERT_EQ(idx.size(), 8u);
  for (int v : idx) EXPECT_EQ(v, 1);
}

TEST(Fragments, MsbFirstWithPadding) {
  const Bits b{1, 0, 1, 1, 1};  // 101 | 11(0)
  EXPECT_EQ(fragment_message(b, 3), (std::vector<int>{6, 7}));
  EXPECT_EQ(assemble_message({6, 7}, 3, 5), b);
}

TEST(Fragments, RoundTrip) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int payload = 1 + static_cast<int>(rng() % 100), j = 1 + static_cast<int>(rng() % 14);
    const MessageSet m = draw_messages(1, payload, j, rng);
    EXPECT_EQ(static_cast<int>(m.codeword_idx[0].size()), fragment_count(payload, j));
    EXPECT_EQ(assemble_message(m.codeword_idx[0], j, payload), m.payloads[0]);
  }
}

TEST(Fragments, Errors) {
  EXPECT_URA_ERROR(fragment_message({}, 4), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(assemble_message({17}, 4, 8), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(assemble_message({0}, 4, 8), ErrorKind::invalid_parameter);
}

TEST(Slot, EmptySlotIsPureNoise) {
  const SlotCodebook cb = build_codebook(16, 4, 1);
  std::mt19937_64 rng(1);
  const SlotObservation obs = synthesize_slot(cb, {}, 0.0, rng, 8);
  EXPECT_EQ(obs.complex_received.cols(), 8);
  EXPECT_EQ(obs.complex_received.norm(), 0.0);
  EXPECT_TRUE(obs.active_index_set.empty());
  EXPECT_URA_ERROR(synthesize_slot(cb, {}, 0.0, rng), ErrorKind::invalid_dimension);
}

TEST(Slot, SingleUserIsRankOne) {
  const SlotCodebook cb = build_codebook(16, 4, 1);
  std::mt19937_64 rng(2);
  const ComplexVector h = random_channel(6, rng);
  const SlotObservation obs = synthesize_slot(cb, {{5, h}}, 0.0, rng);
  const ComplexMatrix expect = cb.complex_matrix.col(4) * h.transpose();
  EXPECT_LT((obs.complex_received - expect).norm(), 1e-14);
  EXPECT_EQ(obs.active_index_set, std::vector<int>{5});
}

TEST(Slot, CollisionSuperposes) {
  const SlotCodebook cb = build_codebook(16, 4, 1);
  std::mt19937_64 rng(3);
  const ComplexVector h1 = random_channel(6, rng), h2 = random_channel(6, rng);
  const SlotObservation obs = synthesize_slot(cb, {{3, h1}, {3, h2}, {9, h1}}, 0.0, rng);
  EXPECT_EQ(obs.active_index_set, (std::vector<int>{3, 9}));
  EXPECT_LT((obs.complex_signal.row(2).transpose() - (h1 + h2)).norm(), 1e-15);
  EXPECT_LT((obs.complex_received - cb.complex_matrix * obs.complex_signal).norm(), 1e-13);
  EXPECT_LT((obs.real_received - cb.real_matrix * realify(obs.complex_signal)).norm(), 1e-13);
}

TEST(Slot, OutOfRangeCodeword) {
  const SlotCodebook cb = build_codebook(16, 4, 1);
  std::mt19937_64 rng(3);
  EXPECT_URA_ERROR(synthesize_slot(cb, {{17, random_channel(4, rng)}}, 0.0, rng), ErrorKind::invalid_parameter);
}

TEST(Slot, SnrAccounting) {
  const int n = 100, m = 100, k = 10;
  const SlotCodebook cb = build_codebook(n, 10, 8);
  std::mt19937_64 rng(9);
  std::vector<ActiveTransmission> users;
  for (int i = 0; i < k; ++i) users.push_back({1 + 37 * i, random_channel(m, rng)});
  for (double snr_db : {0.0, 10.0}) {
    ComplexMatrix x = ComplexMatrix::Zero(cb.codewords(), m);
    for (const auto& u : users) x.row(u.codeword - 1) += u.angular_channel.transpose();
    const double sigma2 = noise_variance_for_snr(x.squaredNorm(), n, m, snr_db);
    const SlotObservation obs = synthesize_slot(cb, users, sigma2, rng);
    const ComplexMatrix clean = cb.complex_matrix * obs.complex_signal;
    const double measured = clean.squaredNorm() / (obs.complex_received - clean).squaredNorm();
    EXPECT_NEAR(measured / std::pow(10.0, snr_db / 10.0), 1.0, 0.1) << snr_db;
  }
}

TEST(Slot, GroupSparsity) {
  const SlotCodebook cb = build_codebook(32, 6, 2);
  std::mt19937_64 rng(5);
  const SlotObservation obs = synthesize_slot(cb, {{2, random_channel(8, rng)}, {40, random_channel(8, rng)}}, 0.1, rng);
  int nonzero_rows = 0;
  for (Index r = 0; r < obs.complex_signal.rows(); ++r) {
    const bool nz = obs.complex_signal.row(r).squaredNorm() > 0.0;
    nonzero_rows += nz;
    if (nz) {
      EXPECT_GT(obs.complex_signal.row(r).cwiseAbs().minCoeff(), 0.0);
    }
  }
  EXPECT_EQ(nonzero_rows, 2);
}

TEST(ObservationDump, CsvAndBinaryRoundTrip) {
  const SlotCodebook cb = build_codebook(10, 4, 77);
  std::mt19937_64 rng(5);
  const SlotObservation obs = synthesize_slot(cb, {{2, random_channel(4, rng)}, {7, random_channel(4, rng)}}, 0.37, rng);
  const io::ObservationDump d = io::make_dump(obs, cb);

  std::stringstream csv;
  io::write_observation_csv(csv, d);
  const io::ObservationDump c = io::read_observation_csv(csv);
  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  io::write_observation_binary(bin, d);
  const io::ObservationDump b = io::read_observation_binary(bin);

  for (const auto* r : {&c, &b}) {
    EXPECT_TRUE(r->real_received == d.real_received);
    EXPECT_EQ(r->codebook_seed, 77u);
    EXPECT_EQ(r->n, 10);
    EXPECT_EQ(r->j_bits, 4);
    EXPECT_EQ(r->noise_variance, 0.37);
    EXPECT_EQ(r->active_index_set, (std::vector<int>{2, 7}));
  }
  // The codebook regenerates from the dumped seed.
  EXPECT_TRUE(build_codebook(b.n, b.j_bits, b.codebook_seed).complex_matrix == cb.complex_matrix);
}

TEST(ObservationDump, RejectsGarbage) {
  std::stringstream s("not a dump");
  EXPECT_URA_ERROR(io::read_observation_binary(s), ErrorKind::io);
  std::stringstream t("1,2,3\n");
  EXPECT_URA_ERROR(io::read_observation_csv(t), ErrorKind::io);
}
