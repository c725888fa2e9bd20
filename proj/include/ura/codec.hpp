// SPDX-License-Identifier: Apache-2.0
//
// Common codebook, message fragmentation and per-slot received-signal synthesis.
//
// Codeword indices are 1-based at every public boundary (fragment tables, dumps,
// active sets) and 0-based only when addressing matrix rows/columns.
#pragma once

#include "ura/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

namespace ura {

inline constexpr int kMaxCodebookBits = 20;

struct SlotCodebook {
  ComplexMatrix complex_matrix;  // N × 2^J
  RealMatrix real_matrix;        // 2N × 2^{J+1}
  int n = 0;
  int j_bits = 0;
  std::uint64_t seed = 0;

  int codewords() const { return 1 << j_bits; }
};

/// [[Re, -Im], [Im, Re]] block embedding of a complex sensing matrix.
inline RealMatrix realify_operator(const ComplexMatrix& a) {
  const Index r = a.rows(), c = a.cols();
  RealMatrix out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = a.real();
  out.topRightCorner(r, c) = -a.imag();
  out.bottomLeftCorner(r, c) = a.imag();
  out.bottomRightCorner(r, c) = a.real();
  return out;
}

/// Stacks [Re; Im].
inline RealMatrix realify(const ComplexMatrix& x) {
  RealMatrix out(2 * x.rows(), x.cols());
  out.topRows(x.rows()) = x.real();
  out.bottomRows(x.rows()) = x.imag();
  return out;
}

/// Inverse of realify: row j pairs with row j + rows/2.
inline ComplexMatrix complexify(const RealMatrix& x) {
  require(x.rows() % 2 == 0, ErrorKind::invalid_dimension, "complexify needs an even row count");
  const Index half = x.rows() / 2;
  ComplexMatrix out(half, x.cols());
  out.real() = x.topRows(half);
  out.imag() = x.bottomRows(half);
  return out;
}

inline SlotCodebook build_codebook(int n, int j_bits, std::uint64_t seed, int max_bits = kMaxCodebookBits) {
  require(n >= 1, ErrorKind::invalid_parameter, "block length must be >= 1");
  require(j_bits >= 1, ErrorKind::invalid_parameter, "fragment width must be >= 1");
  require(j_bits <= max_bits, ErrorKind::resource_limit,
          "fragment width " + std::to_string(j_bits) + " exceeds the configured maximum " +
              std::to_string(max_bits));
  SlotCodebook cb;
  cb.n = n;
  cb.j_bits = j_bits;
  cb.seed = seed;
  const int cols = 1 << j_bits;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / n));
  cb.complex_matrix.resize(n, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < n; ++r) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      cb.complex_matrix(r, c) = {re, im};
    }
  cb.real_matrix = realify_operator(cb.complex_matrix);
  return cb;
}

// ---------------------------------------------------------------------------
// Messages

using Bits = std::vector<std::uint8_t>;

inline int fragment_count(int payload_bits, int j_bits) { return (payload_bits + j_bits - 1) / j_bits; }

/// Splits B bits into S = ceil(B/J) fragments (MSB first, last one zero-padded),
/// returning 1-based codeword indices decimal(v) + 1.
inline std::vector<int> fragment_message(const Bits& bits, int j_bits) {
  require(!bits.empty(), ErrorKind::invalid_parameter, "message must contain at least one bit");
  require(j_bits >= 1 && j_bits <= 30, ErrorKind::invalid_parameter, "fragment width out of range");
  const int s = fragment_count(static_cast<int>(bits.size()), j_bits);
  std::vector<int> out(s);
  for (int f = 0; f < s; ++f) {
    int value = 0;
    for (int b = 0; b < j_bits; ++b) {
      const std::size_t pos = static_cast<std::size_t>(f) * j_bits + b;
      const int bit = pos < bits.size() ? (bits[pos] & 1) : 0;
      value = (value << 1) | bit;
    }
    out[f] = value + 1;
  }
  return out;
}

/// Concatenates the J-bit expansions of 1-based codeword indices and truncates to B bits.
inline Bits assemble_message(const std::vector<int>& indices, int j_bits, int payload_bits) {
  require(j_bits >= 1 && j_bits <= 30, ErrorKind::invalid_parameter, "fragment width out of range");
  Bits out;
  out.reserve(indices.size() * j_bits);
  for (int idx : indices) {
    require(idx >= 1 && idx <= (1 << j_bits), ErrorKind::invalid_parameter, "codeword index out of range");
    const int v = idx - 1;
    for (int b = j_bits - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((v >> b) & 1));
  }
  if (static_cast<int>(out.size()) > payload_bits) out.resize(payload_bits);
  return out;
}

struct MessageSet {
  int payload_bits = 0;
  int j_bits = 0;
  std::vector<Bits> payloads;                  // per user, B bits
  std::vector<std::vector<int>> codeword_idx;  // per user, S one-based indices

  int slots() const { return fragment_count(payload_bits, j_bits); }
};

template <class Rng>
MessageSet draw_messages(int users, int payload_bits, int j_bits, Rng& rng) {
  require(users >= 0 && payload_bits >= 1, ErrorKind::invalid_parameter, "invalid message set size");
  MessageSet set;
  set.payload_bits = payload_bits;
  set.j_bits = j_bits;
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < users; ++k) {
    Bits b(payload_bits);
    for (auto& v : b) v = coin(rng) ? 1 : 0;
    set.codeword_idx.push_back(fragment_message(b, j_bits));
    set.payloads.push_back(std::move(b));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Per-slot observation

struct ActiveTransmission {
  int codeword = 1;  // 1-based
  ComplexVector angular_channel;
};

struct SlotObservation {
  ComplexMatrix complex_received;  // N × M
  RealMatrix real_received;        // 2N × M
  ComplexMatrix complex_signal;    // 2^J × M ground truth X̃
  double noise_variance = 0.0;     // σ² per real dimension; complex entries carry 2σ²
  std::vector<int> active_index_set;  // 1-based, sorted, unique
  std::uint64_t codebook_seed = 0;
};

/// Signal energy threshold for a target SNR R = E‖X‖²/E‖W‖² on the real model.
inline double noise_variance_for_snr(double signal_energy, int n, int m, double snr_db) {
  const double r = std::pow(10.0, snr_db / 10.0);
  return signal_energy / (2.0 * n * m * r);
}

template <class Rng>
SlotObservation synthesize_slot(const SlotCodebook& cb, const std::vector<ActiveTransmission>& users,
                                double sigma2, Rng& rng, Index antennas = -1) {
  require(sigma2 >= 0.0, ErrorKind::invalid_parameter, "noise variance must be non-negative");
  Index m = antennas;
  if (!users.empty()) m = users.front().angular_channel.size();
  require(m >= 1, ErrorKind::invalid_dimension, "antenna count unknown for an empty slot");

  SlotObservation obs;
  obs.noise_variance = sigma2;
  obs.codebook_seed = cb.seed;
  obs.complex_signal = ComplexMatrix::Zero(cb.codewords(), m);
  std::set<int> active;
  for (const auto& u : users) {
    require(u.codeword >= 1 && u.codeword <= cb.codewords(), ErrorKind::invalid_parameter,
            "codeword index " + std::to_string(u.codeword) + " out of range");
    require(u.angular_channel.size() == m, ErrorKind::invalid_dimension, "channel length mismatch");
    obs.complex_signal.row(u.codeword - 1) += u.angular_channel.transpose();
    active.insert(u.codeword);
  }
  obs.active_index_set.assign(active.begin(), active.end());

  obs.complex_received = ComplexMatrix::Zero(cb.n, m);
  for (int idx : obs.active_index_set)
    obs.complex_received.noalias() += cb.complex_matrix.col(idx - 1) * obs.complex_signal.row(idx - 1);
  if (sigma2 > 0.0) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2));
    for (Index c = 0; c < m; ++c)
      for (Index r = 0; r < cb.n; ++r) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        obs.complex_received(r, c) += cplx(re, im);
      }
  }
  obs.real_received = realify(obs.complex_received);
  return obs;
}

}  // namespace ura
