#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <numbers>

#include "logcorr/quadrature.hpp"

using namespace logcorr;

TEST(ExpIntegral, MatchesBoostAcrossRegimes) {
  for (double x = 1e-8; x < 700.0; x *= 1.37) {
    const double ref = boost::math::expint(1, x);
    EXPECT_NEAR(exp_integral_e1(x), ref, 2e-15 * std::max(1.0, ref)) << "x=" << x;
  }
}

TEST(ExpIntegral, ValueAtOne) { EXPECT_NEAR(exp_integral_e1(1.0), 0.21938393439552, 1e-14); }

TEST(ExpIntegral, LargeArgumentBound) {
  for (double x : {5.0, 20.0, 100.0, 500.0}) EXPECT_LT(exp_integral_e1(x), std::exp(-x) / x);
}

TEST(ExpIntegral, SmallArgumentLog) {
  EXPECT_NEAR(exp_integral_e1(1e-6), -std::numbers::egamma - std::log(1e-6), 1.1e-6);
}

TEST(Ein, SeriesAgainstQuadrature) {
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double x : {1e-3, 0.5, 1.0, 3.0, 12.0}) {
    const double q = ts.integrate([](double u) { return -std::expm1(-u) / u; }, 0.0, x);
    EXPECT_NEAR(ein(x), q, 1e-13 * std::max(1.0, q)) << x;
  }
}

TEST(Frullani, Identities) {
  EXPECT_NEAR(frullani_truncated(4.0, 8.0, INFINITY), std::numbers::ln2, 1e-15);
  EXPECT_EQ(frullani_truncated(1.0, 2.0, 0.0), 0.0);
  EXPECT_EQ(frullani_truncated(3.0, 3.0, 7.0), 0.0);
  EXPECT_NEAR(frullani_truncated(2.0, 1.0, 5.0), -frullani_truncated(1.0, 2.0, 5.0), 1e-15);
}

TEST(Frullani, TruncatedAgainstGaussKronrod) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double q = GK::integrate([](double r) { return r == 0.0 ? 1.0 : (std::exp(-r) - std::exp(-2 * r)) / r; },
                                 0.0, 1.0, 15, 1e-14);
  EXPECT_NEAR(frullani_truncated(1.0, 2.0, 1.0), q, 1e-10);
}

TEST(Frullani, BandIsDifferenceOfTruncations) {
  for (double r1 : {0.0, 0.01, 0.7, 3.0})
    for (double r2 : {0.5, 2.0, 40.0}) {
      if (r2 <= r1) continue;
      const double want = frullani_truncated(0.3, 5.0, r2) - frullani_truncated(0.3, 5.0, r1);
      EXPECT_NEAR(frullani_band(0.3, 5.0, r1, r2), want, 1e-13);
    }
  EXPECT_NEAR(frullani_band(2.0, 3.0, 4.0, INFINITY),
              exp_integral_e1(8.0) - exp_integral_e1(12.0), 1e-16);
}

TEST(TruncatedCov, Examples) {
  EXPECT_NEAR(truncated_cov(1.0, 3.0, 1e-12), std::numbers::ln2, 1e-9);
  EXPECT_NEAR(truncated_cov(1.0, 3.0, 1.0),
              std::numbers::ln2 + boost::math::expint(1, 8.0) - boost::math::expint(1, 4.0), 1e-14);
  EXPECT_DOUBLE_EQ(truncated_cov(1.0, 3.0, 0.1), truncated_cov(3.0, 1.0, 0.1));
  // Decreasing eps adds positive mass.
  EXPECT_LT(truncated_cov(1.0, 3.0, 1.0), truncated_cov(1.0, 3.0, 0.5));
  EXPECT_LT(truncated_cov(1.0, 1.0, 0.1), truncated_cov(1.0, 1.0, 0.01));
}

TEST(Integrate, LogEndpointSingularity) {
  QuadratureSettings qs;
  qs.abs_tol = qs.rel_tol = 1e-12;
  const auto r = integrate([](double x) { return std::log(x); }, 0.0, 1.0, qs);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, -1.0, 1e-11);
  // Default tolerances are honoured by the error estimate.
  const auto d = integrate([](double x) { return std::log(x); }, 0.0, 1.0, QuadratureSettings{});
  EXPECT_LE(std::abs(d.value + 1.0), std::max(1e-9, 1e-8));
}

TEST(Integrate, InteriorLogWithBreakpoint) {
  QuadratureSettings qs;
  qs.abs_tol = qs.rel_tol = 1e-12;
  const auto r = integrate([](double x) { return std::log(std::abs(x - 0.3)); }, 0.0, 1.0, qs, std::vector<double>{0.3});
  const double want = 0.3 * std::log(0.3) - 0.3 + 0.7 * std::log(0.7) - 0.7;
  EXPECT_NEAR(r.value, want, 1e-11);
}

TEST(GaussLegendre, ExactForPolynomials) {
  const auto g = gauss_legendre(8);
  for (int p = 0; p <= 15; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], p);
    EXPECT_NEAR(s, p % 2 ? 0.0 : 2.0 / (p + 1), 1e-14) << p;
  }
}
