// SPDX-License-Identifier: Apache-2.0
#include "ura/channel_model.hpp"

#include "test_util.hpp"

#include <random>

using namespace ura;

namespace {

double max_dev_from_identity(const ComplexMatrix& u) {
  const Index m = u.cols();
  return (u.adjoint() * u - ComplexMatrix::Identity(m, m)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(SteeringVector, ZeroFrequencyIsFlat) {
  const ComplexVector e = steering_vector(0.0, 4);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(e[i] - cplx(0.5, 0.0)), 0.0, 1e-15);
}

TEST(SteeringVector, QuarterFrequency) {
  const ComplexVector e = steering_vector(0.25, 2);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(e[0] - cplx(s, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(e[1] - cplx(0.0, -s)), 0.0, 1e-15);
}

TEST(SteeringVector, UnitNorm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(-2.0, 2.0);
  for (int m = 1; m <= 40; m += 3) EXPECT_NEAR(steering_vector(w(rng), m).norm(), 1.0, 1e-14);
}

TEST(SteeringVector, RejectsEmpty) { EXPECT_URA_ERROR(steering_vector(0.1, 0), ErrorKind::invalid_dimension); }

TEST(AngularTransform, ScalarGeometry) {
  const ComplexMatrix u = angular_transform_matrix({1, 1, 0.5});
  ASSERT_EQ(u.rows(), 1);
  EXPECT_NEAR(std::abs(u(0, 0) - cplx(1.0, 0.0)), 0.0, 1e-15);
}

TEST(AngularTransform, TwoByOneColumns) {
  const ComplexMatrix u = angular_transform_matrix({2, 1, 0.5});
  EXPECT_LT((u.col(0) - steering_vector(0.0, 2)).norm(), 1e-15);
  EXPECT_LT((u.col(1) - steering_vector(0.5, 2)).norm(), 1e-15);
}

TEST(AngularTransform, UnitaryUpTo256) {
  for (const UpaGeometry g : {UpaGeometry{4, 25, 0.5}, UpaGeometry{16, 16, 0.5}, UpaGeometry{1, 7, 0.5},
                              UpaGeometry{8, 4, 0.5}})
    EXPECT_LT(max_dev_from_identity(angular_transform_matrix(g)), 1e-10) << g.m_v << "x" << g.m_h;
}

TEST(AngularTransform, KroneckerOrderHorizontalOuter) {
  // Column h*m_v + v is e_h(h/m_h) ⊗ e_v(v/m_v).
  const UpaGeometry g{3, 4, 0.5};
  const ComplexMatrix u = angular_transform_matrix(g);
  for (int h = 0; h < g.m_h; ++h)
    for (int v = 0; v < g.m_v; ++v) {
      const ComplexVector expect =
          kron(steering_vector(double(h) / g.m_h, g.m_h), steering_vector(double(v) / g.m_v, g.m_v));
      EXPECT_LT((u.col(h * g.m_v + v) - expect).norm(), 1e-14);
    }
}

TEST(Scatterers, DeterministicUnderSeed) {
  std::mt19937_64 a(1), b(1);
  const auto x = generate_scatterers(16, a);
  const auto y = generate_scatterers(16, b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].elevation_mean, y[i].elevation_mean);
    EXPECT_EQ(x[i].azimuth_mean, y[i].azimuth_mean);
  }
}

TEST(Scatterers, DefaultSpreads) {
  std::mt19937_64 rng(1);
  for (const auto& s : generate_scatterers(16, rng)) {
    EXPECT_DOUBLE_EQ(s.elevation_spread, 19.0 * kPi / 180.0);
    EXPECT_DOUBLE_EQ(s.azimuth_spread, 7.0 * kPi / 180.0);
  }
}

TEST(Scatterers, AnglesInRange) {
  std::mt19937_64 rng(99);
  const auto s = generate_scatterers(3, rng);
  ASSERT_EQ(s.size(), 3u);
  for (const auto& x : s) {
    EXPECT_GE(x.elevation_mean, -kPi / 2);
    EXPECT_LE(x.elevation_mean, kPi / 2);
    EXPECT_GE(x.azimuth_mean, -kPi / 2);
    EXPECT_LE(x.azimuth_mean, kPi / 2);
  }
}

TEST(Scatterers, RejectsZeroCount) {
  std::mt19937_64 rng(1);
  EXPECT_URA_ERROR(generate_scatterers(0, rng), ErrorKind::invalid_parameter);
}

TEST(UserChannel, SingleRayIsKroneckerSteering) {
  const UpaGeometry g{4, 8, 0.5};
  const RayAngles ray{0.7, -0.3};
  ComplexVector gain(1);
  gain[0] = 1.0;
  const UserChannel ch = channel_from_rays({ray}, gain, g);
  EXPECT_LT((ch.spatial - upa_response(ray.elevation, ray.azimuth, g)).norm(), 1e-15);
  EXPECT_EQ(ch.path_count, 1);
}

TEST(UserChannel, NormPreserved) {
  const UpaGeometry g{4, 25, 0.5};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto sc = generate_scatterers(16, rng);
    const UserChannel ch = synthesize_user_channel(sc, g, rng);
    EXPECT_NEAR(ch.angular.norm(), ch.spatial.norm(), 1e-10 * ch.spatial.norm());
    EXPECT_GE(ch.path_count, 1);
  }
}

TEST(UserChannel, DeterministicUnderSeed) {
  const UpaGeometry g{4, 8, 0.5};
  std::mt19937_64 a(17), b(17);
  const auto ca = synthesize_user_channel(generate_scatterers(16, a), g, a);
  const auto cb = synthesize_user_channel(generate_scatterers(16, b), g, b);
  EXPECT_TRUE(ca.angular == cb.angular);
}

TEST(UserChannel, RejectsEmptyScatterers) {
  std::mt19937_64 rng(1);
  EXPECT_URA_ERROR(synthesize_user_channel({}, UpaGeometry{}, rng), ErrorKind::invalid_parameter);
}

TEST(UserChannel, SingleRayPeakAtPredicate) {
  const UpaGeometry g{4, 25, 0.5};
  const ComplexMatrix u = angular_transform_matrix(g);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
  for (int i = 0; i < 200; ++i) {
    const double el = ang(rng), az = ang(rng);
    ComplexVector gain(1);
    gain[0] = cplx(0.3, -1.1);
    const UserChannel ch = channel_from_rays({{el, az}}, gain, g);
    const int peak = peak_support_predicate(el, az, g).linear(g);
    const Eigen::VectorXd mag = ch.angular.cwiseAbs();
    for (Index m = 0; m < mag.size(); ++m)
      if (m != peak) {
        EXPECT_LT(mag[m], mag[peak]) << "angles " << el << ", " << az;
      }
  }
}

TEST(UserChannel, AngularSparsity) {
  const UpaGeometry g{4, 25, 0.5};
  std::mt19937_64 rng(2024);
  double acc = 0.0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto sc = generate_scatterers(16, rng);
    acc += energy_support_fraction(synthesize_user_channel(sc, g, rng).angular, 0.95);
  }
  EXPECT_LT(acc / n, 0.5);
}

TEST(PeakPredicate, BroadsideElevationMapsToFirstVerticalBin) {
  for (const UpaGeometry g : {UpaGeometry{4, 25, 0.5}, UpaGeometry{8, 2, 0.5}, UpaGeometry{3, 3, 1.0}})
    EXPECT_EQ(peak_support_predicate(kPi / 2, 0.4, g).m_v, 1);
}

TEST(PeakPredicate, ZeroAnglesMapToFirstHorizontalBin) {
  EXPECT_EQ(peak_support_predicate(0.0, 0.0, {4, 25, 0.5}).m_h, 1);
}

TEST(PeakPredicate, RejectsOutOfRange) {
  EXPECT_URA_ERROR(peak_support_predicate(2.0, 0.0, {4, 25, 0.5}), ErrorKind::invalid_parameter);
  EXPECT_URA_ERROR(peak_support_predicate(0.0, -1.7, {4, 25, 0.5}), ErrorKind::invalid_parameter);
}

TEST(PeakPredicate, ResidualWithinHalfBin) {
  const UpaGeometry g{4, 25, 0.5};
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
  for (int i = 0; i < 1000; ++i) {
    const double el = ang(rng), az = ang(rng);
    const PeakIndex p = peak_support_predicate(el, az, g);
    EXPECT_LE(wrapped_bin_residual(vertical_frequency(el, g.delta), p.m_v, g.m_v), 0.5 / g.m_v + 1e-15);
    EXPECT_LE(wrapped_bin_residual(horizontal_frequency(el, az, g.delta), p.m_h, g.m_h), 0.5 / g.m_h + 1e-15);
  }
}

TEST(PeakPredicate, MatchesVerticalMagnitudeScan) {
  const UpaGeometry g{4, 25, 0.5};
  const ComplexMatrix uv = dft_steering_matrix(g.m_v);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
  for (int i = 0; i < 1000; ++i) {
    const double el = ang(rng), az = ang(rng);
    Index best = 0;
    (uv.adjoint() * steering_vector(vertical_frequency(el, g.delta), g.m_v)).cwiseAbs().maxCoeff(&best);
    EXPECT_EQ(peak_support_predicate(el, az, g).m_v, best + 1);
  }
}

TEST(PlantedChannel, ZeroSpreadHitsOneBeam) {
  const UpaGeometry g{4, 8, 0.5};
  std::mt19937_64 rng(4);
  const PeakIndex anchor{3, 6};
  const UserChannel ch = planted_user_channel(anchor, g, rng, 5, 0.0);
  const Index peak = anchor.linear(g);
  EXPECT_GT(std::abs(ch.angular[peak]), 0.0);
  EXPECT_NEAR((ch.angular.squaredNorm() - std::norm(ch.angular[peak])) / ch.angular.squaredNorm(), 0.0, 1e-20);
}

TEST(PlantedChannel, SpreadStaysNearAnchor) {
  const UpaGeometry g{4, 8, 0.5};
  std::mt19937_64 rng(4);
  int hits = 0;
  for (int i = 0; i < 100; ++i) {
    const PeakIndex anchor{1 + i % 4, 1 + i % 8};
    Index best = 0;
    planted_user_channel(anchor, g, rng).angular.cwiseAbs().maxCoeff(&best);
    hits += best == anchor.linear(g);
  }
  EXPECT_GE(hits, 90);
}

TEST(PlantedChannel, RejectsAnchorOffGrid) {
  std::mt19937_64 rng(1);
  EXPECT_URA_ERROR(planted_user_channel(PeakIndex{5, 1}, UpaGeometry{4, 8, 0.5}, rng), ErrorKind::invalid_parameter);
}
