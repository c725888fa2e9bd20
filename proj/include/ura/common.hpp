// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ura {

using cplx = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

/// Failure categories surfaced by the toolkit. The CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_dimension,
  invalid_parameter,
  invalid_state,
  resource_limit,
  numerical_collapse,
  malformed_partition,
  undefined_metric,
  empty_output,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::resource_limit: return "resource-limit";
    case ErrorKind::numerical_collapse: return "numerical-collapse";
    case ErrorKind::malformed_partition: return "malformed-partition";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::empty_output: return "empty-output";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix, for re-wrapping with more context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = mix_seed(master);
  s = mix_seed(s ^ (a + 0x632be59bd9b4e019ULL));
  s = mix_seed(s ^ (b + 0x8cb92ba72f3d8dd7ULL));
  s = mix_seed(s ^ (c + 0x4f1bbcdcbfa53e0bULL));
  return s;
}

}  // namespace ura
