#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "logcorr/rng.hpp"
#include "logcorr/stats.hpp"

using namespace logcorr;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswers) {
  using P = Philox4x32;
  EXPECT_EQ(P::block({0, 0, 0, 0}, {0, 0}), (P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(P::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, DeterministicAndDistinct) {
  RngStream a(42, 3, 1), b(42, 3, 1), c(42, 4, 1), d(42, 3, 2);
  for (int i = 0; i < 100; ++i) {
    const double x = a.gaussian();
    EXPECT_EQ(x, b.gaussian());
    EXPECT_NE(x, c.gaussian());
    EXPECT_NE(x, d.gaussian());
  }
}

TEST(RngStream, UniformRanges) {
  RngStream s(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform(), v = s.uniform_open();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(RngStream, GaussianMoments) {
  RngStream s(9);
  std::vector<double> x(200000);
  for (auto& v : x) v = s.gaussian();
  const auto m = mean_se(x);
  EXPECT_LT(std::abs(m.mean) / m.se, 4.0);
  const auto var = variance_se(x);
  EXPECT_LT(std::abs(var.mean - 1.0) / var.se, 4.0);
}

// chf of SaS(alpha) is exp(-|theta|^alpha).
TEST(SampleSas, CharacteristicFunction) {
  for (double alpha : {0.7, 1.0, 1.5, 2.0}) {
    RngStream s(11, static_cast<std::uint64_t>(alpha * 10));
    std::vector<double> x(200000);
    for (auto& v : x) v = sample_sas(s, alpha);
    for (const auto& p : empirical_chf(x, {0.5, 1.0})) {
      const double want = std::exp(-std::pow(p.theta, alpha));
      EXPECT_LT(std::abs(p.re - want), 4 * p.se_re) << alpha << " " << p.theta;
      EXPECT_LT(std::abs(p.im), 4 * p.se_im);
    }
  }
}

TEST(SampleSubordinator, LaplaceTransform) {
  RngStream s(3);
  EXPECT_EQ(sample_subordinator(s, 1.0, 2.5), 2.5);
  std::vector<double> e(1000000);
  for (auto& v : e) v = std::exp(-sample_subordinator(s, 0.5, 1.0));
  const auto m = mean_se(e);
  EXPECT_LT(std::abs(m.mean - std::exp(-1.0)), 3 * m.se);
}

TEST(PoissonPath, MeanAndParity) {
  RngStream s(21);
  EXPECT_TRUE(sample_poisson_path(s, 0.0, 2.0).empty());
  std::vector<double> n(100000), odd(100000);
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto p = sample_poisson_path(s, 3.0, 2.0);
    n[i] = static_cast<double>(p.size());
    odd[i] = p.size() % 2;
    for (std::size_t k = 1; k < p.size(); ++k) ASSERT_LT(p[k - 1], p[k]);
  }
  const auto mn = mean_se(n), mo = mean_se(odd);
  EXPECT_LT(std::abs(mn.mean - 6.0), 3 * mn.se);
  EXPECT_LT(std::abs(mo.mean - poisson_odd_probability(6.0)), 3 * mo.se);
}

TEST(SamplePoisson, MeanAcrossRegimes) {
  for (double lam : {0.3, 5.0, 40.0, 1e4}) {
    RngStream s(5, static_cast<std::uint64_t>(lam));
    std::vector<double> x(100000);
    for (auto& v : x) v = static_cast<double>(sample_poisson(s, lam));
    const auto m = mean_se(x);
    EXPECT_LT(std::abs(m.mean - lam), 4 * m.se) << lam;
    const auto v = variance_se(x);
    EXPECT_LT(std::abs(v.mean - lam), 4 * v.se) << lam;
  }
}

TEST(SphereProcess, HemisphereCountsAndVoid) {
  const Space sp = Space::sphere(2, SphereMode::RotationInvariant);
  RngStream s(8);
  const double intensity = 2.0;
  std::vector<double> north(50000), south(50000), empty(50000);
  for (std::size_t i = 0; i < north.size(); ++i) {
    const auto pts = sample_sphere_ppp(s, sp, intensity);
    for (const auto& u : pts) (u[2] > 0 ? north[i] : south[i]) += 1.0;
    empty[i] = pts.empty();
  }
  const auto mn = mean_se(north);
  EXPECT_LT(std::abs(mn.mean - intensity * std::numbers::pi / 2), 3 * mn.se);
  const auto me = mean_se(empty);
  EXPECT_LT(std::abs(me.mean - std::exp(-intensity * std::numbers::pi)), 3 * me.se + 1e-12);
  SampleMatrix m(north.size(), 2);
  for (std::size_t i = 0; i < north.size(); ++i) {
    m(i, 0) = north[i];
    m(i, 1) = south[i];
  }
  const auto c = empirical_cov(m);
  EXPECT_LT(std::abs(c.cov(0, 1)), 3 * c.se(0, 1));
}
