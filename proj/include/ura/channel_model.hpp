// SPDX-License-Identifier: Apache-2.0
//
// Angular-domain channel synthesis for a uniform planar array (UPA).
//
// Spatial channels are sums of Kronecker steering vectors e_h(Ω_h) ⊗ e_v(Ω_v);
// the vector index of antenna (v, h) is h * m_v + v (column-major over the
// m_v × m_h panel). The angular channel is U^H h̃ with U = U_h ⊗ U_v, the
// two-dimensional DFT basis, so both domains share the same vectorization.
#pragma once

#include "ura/common.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace ura {

struct UpaGeometry {
  int m_v = 4;
  int m_h = 25;
  double delta = 0.5;

  int antennas() const { return m_v * m_h; }

  void validate() const {
    require(m_v >= 1 && m_h >= 1, ErrorKind::invalid_dimension, "UPA needs m_v >= 1 and m_h >= 1");
    require(delta > 0.0, ErrorKind::invalid_parameter, "antenna spacing ratio must be positive");
  }
};

struct Scatterer {
  double elevation_mean = 0.0;  // radians
  double azimuth_mean = 0.0;    // radians
  double elevation_spread = 0.0;
  double azimuth_spread = 0.0;
  double mean_power = 1.0;
};

struct RayAngles {
  double elevation = 0.0;
  double azimuth = 0.0;
};

struct UserChannel {
  ComplexVector spatial;
  ComplexVector angular;
  int path_count = 0;
  ComplexVector path_gains;
  std::vector<RayAngles> path_angles;
};

enum class SpreadShape { laplacian, gaussian };

struct ScattererOptions {
  double elevation_spread_deg = 19.0;
  double azimuth_spread_deg = 7.0;
  bool random_power = false;  // Exp(1) mean powers instead of a flat profile
};

struct ChannelOptions {
  double activation_probability = 0.5;
  int subpaths_per_scatterer = 10;
  SpreadShape shape = SpreadShape::laplacian;
  double large_scale_gain = 1.0;  // multiplies the unit-energy channel power
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// e(ω)[i] = exp(-j 2π i ω) / sqrt(m).
inline ComplexVector steering_vector(double omega, int m) {
  require(m >= 1, ErrorKind::invalid_dimension, "steering vector length must be >= 1");
  ComplexVector e(m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i) e[i] = std::polar(scale, -2.0 * kPi * i * omega);
  return e;
}

/// Columns e(k/m), k = 0..m-1.
inline ComplexMatrix dft_steering_matrix(int m) {
  require(m >= 1, ErrorKind::invalid_dimension, "DFT size must be >= 1");
  ComplexMatrix u(m, m);
  for (int k = 0; k < m; ++k) u.col(k) = steering_vector(static_cast<double>(k) / m, m);
  return u;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// U = U_h ⊗ U_v (unitary).
inline ComplexMatrix angular_transform_matrix(const UpaGeometry& geom) {
  geom.validate();
  return kron(dft_steering_matrix(geom.m_h), dft_steering_matrix(geom.m_v));
}

inline double vertical_frequency(double elevation, double delta) { return delta * std::cos(elevation); }

inline double horizontal_frequency(double elevation, double azimuth, double delta) {
  return delta * std::sin(elevation) * std::cos(azimuth);
}

/// Spatial response of one ray: e_h(Ω_h) ⊗ e_v(Ω_v).
inline ComplexVector upa_response(double elevation, double azimuth, const UpaGeometry& geom) {
  return kron(steering_vector(horizontal_frequency(elevation, azimuth, geom.delta), geom.m_h),
              steering_vector(vertical_frequency(elevation, geom.delta), geom.m_v));
}

namespace detail {

inline bool angle_in_range(double a) {
  constexpr double slack = 1e-12;
  return std::isfinite(a) && a >= -kPi / 2 - slack && a <= kPi / 2 + slack;
}

// Nearest DFT bin to a normalized frequency on the unit circle; returns 0-based bin.
inline int nearest_bin(double omega, int m) {
  double pos = omega * m;
  pos -= m * std::floor(pos / m);
  int bin = static_cast<int>(std::lround(pos));
  return bin % m;
}

}  // namespace detail

struct PeakIndex {
  int m_v = 1;  // 1-based vertical beam index
  int m_h = 1;  // 1-based horizontal beam index

  /// 0-based position inside the vectorized angular channel.
  int linear(const UpaGeometry& geom) const { return (m_h - 1) * geom.m_v + (m_v - 1); }
  bool operator==(const PeakIndex&) const = default;
};

/// Beam pair whose normalized frequency is closest to the ray's (circular distance).
inline PeakIndex peak_support_predicate(double elevation, double azimuth, const UpaGeometry& geom) {
  geom.validate();
  require(detail::angle_in_range(elevation) && detail::angle_in_range(azimuth),
          ErrorKind::invalid_parameter, "angles must lie in [-pi/2, pi/2]");
  const double wv = vertical_frequency(elevation, geom.delta);
  const double wh = horizontal_frequency(elevation, azimuth, geom.delta);
  return {detail::nearest_bin(wv, geom.m_v) + 1, detail::nearest_bin(wh, geom.m_h) + 1};
}

/// Residual |ω - (m̃-1)/m| wrapped onto [0, 1/2], in normalized-frequency units.
inline double wrapped_bin_residual(double omega, int bin_1based, int m) {
  double d = omega - static_cast<double>(bin_1based - 1) / m;
  d -= std::floor(d + 0.5);
  return std::abs(d);
}

template <class Rng>
std::vector<Scatterer> generate_scatterers(int count, Rng& rng, const ScattererOptions& opt = {}) {
  require(count >= 1, ErrorKind::invalid_parameter, "scatterer count must be >= 1");
  std::uniform_real_distribution<double> angle(-kPi / 2, kPi / 2);
  std::exponential_distribution<double> power(1.0);
  std::vector<Scatterer> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Scatterer s;
    s.elevation_mean = angle(rng);
    s.azimuth_mean = angle(rng);
    s.elevation_spread = deg_to_rad(opt.elevation_spread_deg);
    s.azimuth_spread = deg_to_rad(opt.azimuth_spread_deg);
    s.mean_power = opt.random_power ? power(rng) : 1.0;
    out.push_back(s);
  }
  return out;
}

inline std::vector<Scatterer> generate_scatterers(int count, std::uint64_t seed,
                                                  const ScattererOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  return generate_scatterers(count, rng, opt);
}

namespace detail {

template <class Rng>
double spread_sample(double spread, SpreadShape shape, Rng& rng) {
  if (spread <= 0.0) return 0.0;
  if (shape == SpreadShape::gaussian) return std::normal_distribution<double>(0.0, spread)(rng);
  // Laplacian with standard deviation `spread`: scale b = spread / sqrt(2).
  const double b = spread / std::sqrt(2.0);
  const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

inline double clamp_angle(double a) { return std::clamp(a, -kPi / 2, kPi / 2); }

}  // namespace detail

/// Builds the channel from explicit rays (Kronecker sum), then rotates it to the angular domain.
inline UserChannel channel_from_rays(const std::vector<RayAngles>& rays, const ComplexVector& gains,
                                     const UpaGeometry& geom) {
  geom.validate();
  require(!rays.empty() && static_cast<Index>(rays.size()) == gains.size(),
          ErrorKind::invalid_dimension, "ray table and gain vector must be non-empty and aligned");
  UserChannel ch;
  ch.spatial = ComplexVector::Zero(geom.antennas());
  for (std::size_t l = 0; l < rays.size(); ++l)
    ch.spatial += gains[static_cast<Index>(l)] * upa_response(rays[l].elevation, rays[l].azimuth, geom);
  ch.angular = angular_transform_matrix(geom).adjoint() * ch.spatial;
  ch.path_count = static_cast<int>(rays.size());
  ch.path_gains = gains;
  ch.path_angles = rays;
  return ch;
}

/// Draws one user's channel: Bernoulli scatterer activation (at least one effective),
/// `subpaths_per_scatterer` rays per effective scatterer and unit expected energy
/// scaled by `large_scale_gain`.
template <class Rng>
UserChannel synthesize_user_channel(const std::vector<Scatterer>& scatterers, const UpaGeometry& geom,
                                    Rng& rng, const ChannelOptions& opt = {}) {
  require(!scatterers.empty(), ErrorKind::invalid_parameter, "at least one scatterer is required");
  require(opt.subpaths_per_scatterer >= 1, ErrorKind::invalid_parameter, "need >= 1 subpath");
  require(opt.activation_probability > 0.0 && opt.activation_probability <= 1.0,
          ErrorKind::invalid_parameter, "activation probability must be in (0, 1]");
  geom.validate();

  std::bernoulli_distribution active(opt.activation_probability);
  std::vector<int> effective;
  while (effective.empty()) {
    for (std::size_t i = 0; i < scatterers.size(); ++i)
      if (active(rng)) effective.push_back(static_cast<int>(i));
  }

  double total_power = 0.0;
  for (int i : effective) total_power += scatterers[i].mean_power;

  std::vector<RayAngles> rays;
  std::vector<cplx> gains;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i : effective) {
    const Scatterer& sc = scatterers[i];
    const double ray_var = opt.large_scale_gain * sc.mean_power / (total_power * opt.subpaths_per_scatterer);
    const double g_std = std::sqrt(ray_var / 2.0);
    for (int l = 0; l < opt.subpaths_per_scatterer; ++l) {
      RayAngles r;
      r.elevation = detail::clamp_angle(sc.elevation_mean + detail::spread_sample(sc.elevation_spread, opt.shape, rng));
      r.azimuth = detail::clamp_angle(sc.azimuth_mean + detail::spread_sample(sc.azimuth_spread, opt.shape, rng));
      rays.push_back(r);
      const double re = gauss(rng);
      const double im = gauss(rng);
      gains.emplace_back(g_std * re, g_std * im);
    }
  }
  ComplexVector g(static_cast<Index>(gains.size()));
  for (std::size_t l = 0; l < gains.size(); ++l) g[static_cast<Index>(l)] = gains[l];
  return channel_from_rays(rays, g, geom);
}

/// Planted channel: `rays` paths whose normalized frequencies scatter around the
/// centre of one beam (Laplacian, `spread_bins` bin widths), with unit expected
/// energy times `gain`. Frequencies are set directly, so every beam of the grid
/// can serve as an anchor.
template <class Rng>
UserChannel planted_user_channel(const PeakIndex& anchor, const UpaGeometry& geom, Rng& rng, int rays = 10,
                                 double spread_bins = 0.25, double gain = 1.0) {
  geom.validate();
  require(anchor.m_v >= 1 && anchor.m_v <= geom.m_v && anchor.m_h >= 1 && anchor.m_h <= geom.m_h,
          ErrorKind::invalid_parameter, "anchor beam outside the grid");
  require(rays >= 1 && spread_bins >= 0.0, ErrorKind::invalid_parameter, "invalid planted ray parameters");
  const double fv = static_cast<double>(anchor.m_v - 1) / geom.m_v;
  const double fh = static_cast<double>(anchor.m_h - 1) / geom.m_h;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double g_std = std::sqrt(gain / (2.0 * rays));
  UserChannel ch;
  ch.spatial = ComplexVector::Zero(geom.antennas());
  ch.path_gains.resize(rays);
  for (int l = 0; l < rays; ++l) {
    const double wv = fv + detail::spread_sample(spread_bins / geom.m_v, SpreadShape::laplacian, rng);
    const double wh = fh + detail::spread_sample(spread_bins / geom.m_h, SpreadShape::laplacian, rng);
    const double re = gauss(rng);
    const double im = gauss(rng);
    const cplx g(g_std * re, g_std * im);
    ch.path_gains[l] = g;
    ch.spatial += g * kron(steering_vector(wh, geom.m_h), steering_vector(wv, geom.m_v));
  }
  ch.angular = angular_transform_matrix(geom).adjoint() * ch.spatial;
  ch.path_count = rays;
  return ch;
}

/// Users uniformly placed over a semicircle of radius `radius_m`; returns the
/// linear large-scale gain per user (distance path loss and unit-mean log-normal shadowing).
template <class Rng>
std::vector<double> draw_large_scale_gains(int users, Rng& rng, double radius_m = 50.0,
                                           double pathloss_exponent = 3.7, double shadowing_db = 8.0,
                                           double min_distance_m = 5.0) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double ln10 = std::log(10.0);
  const double sigma = shadowing_db * ln10 / 10.0;
  const double ref = radius_m / std::sqrt(2.0);  // median distance of an area-uniform draw
  std::vector<double> out(users);
  for (int k = 0; k < users; ++k) {
    const double d = std::max(min_distance_m, radius_m * std::sqrt(unit(rng)));
    const double shadow = std::exp(sigma * gauss(rng) - 0.5 * sigma * sigma);
    out[k] = std::pow(d / ref, -pathloss_exponent) * shadow;
  }
  return out;
}

/// Smallest fraction of entries carrying `energy_fraction` of the vector's energy.
inline double energy_support_fraction(const ComplexVector& v, double energy_fraction = 0.95) {
  std::vector<double> e(static_cast<std::size_t>(v.size()));
  double total = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    e[static_cast<std::size_t>(i)] = std::norm(v[i]);
    total += e[static_cast<std::size_t>(i)];
  }
  if (total <= 0.0) return 0.0;
  std::sort(e.begin(), e.end(), std::greater<>());
  double acc = 0.0;
  std::size_t count = 0;
  while (count < e.size() && acc < energy_fraction * total) acc += e[count++];
  return static_cast<double>(count) / static_cast<double>(e.size());
}

}  // namespace ura
