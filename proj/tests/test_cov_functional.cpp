#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "logcorr/cov_functional.hpp"
#include "logcorr/stats.hpp"

using namespace logcorr;

TEST(CovFunctional, IndicatorHalfLineIsTwoLog2) {
  const auto f = TestFunction::indicator(0, 1);
  EXPECT_NEAR(cov_functional(Space::half_line(), 0.5, f, f), 2 * std::numbers::ln2, 1e-6);
}

TEST(CovFunctional, CrossSupportFullLineVanishes) {
  EXPECT_NEAR(cov_functional(Space::full_line(), 0.5, TestFunction::indicator(-1, 0), TestFunction::indicator(0, 1)),
              0.0, 1e-8);
}

TEST(CovFunctional, SymmetricAndBilinear) {
  const Space sp = Space::half_line();
  const auto f = TestFunction::exponential(1), g = TestFunction::gaussian(1, 0.5);
  const double fg = cov_functional(sp, 0.5, f, g);
  EXPECT_NEAR(fg, cov_functional(sp, 0.5, g, f), 1e-9);
  EXPECT_NEAR(cov_functional(sp, 0.5, f.scaled(3.0), g), 3.0 * fg, 1e-8);
}

// Indicator of [a,b] on the half line at H = 1/2: closed form via G(x) = x^2 log x,
// int int_{[a,b]^2} log(s+t) - log|s-t| ds dt.
TEST(CovFunctional, ShiftedIndicatorClosedForm) {
  auto P = [](double x) { return x > 0 ? 0.5 * x * x * std::log(x) - 0.75 * x * x : 0.0; };
  const double a = 0.5, b = 2.0;
  // int int log(s+t) over the square = P(2b) - 2P(a+b) + P(2a); log|s-t| part = 2P(b-a).
  const double want = P(2 * b) - 2 * P(a + b) + P(2 * a) - 2 * P(b - a);
  EXPECT_NEAR(cov_functional(Space::half_line(), 0.5, TestFunction::indicator(a, b), TestFunction::indicator(a, b)),
              want, 1e-6);
}

TEST(CovFunctional, FubiniRouteAgrees) {
  const Space sp = Space::half_line();
  for (double H : {0.5, 0.3}) {
    const auto f = TestFunction::exponential(1), g = TestFunction::indicator(0, 2);
    EXPECT_NEAR(cov_functional_via_gamma_r(sp, H, f, g), cov_functional(sp, H, f, g), 1e-6) << H;
  }
}

TEST(CovFunctional, TruncatedIncreasesToFull) {
  const Space sp = Space::half_line();
  const auto f = TestFunction::indicator(0, 1);
  const double full = cov_functional(sp, 0.5, f, f);
  double prev = 0.0;
  for (double eps : {1.0, 0.1, 1e-3, 1e-6}) {
    const double v = truncated_cov_functional(sp, 0.5, f, f, eps);
    EXPECT_GT(v, prev);
    EXPECT_LT(v, full + 1e-9);
    prev = v;
  }
  EXPECT_NEAR(prev, full, 1e-4);
}

TEST(CovFunctional, BandsAdd) {
  const Space sp = Space::half_line();
  const auto f = TestFunction::exponential(2), g = TestFunction::indicator(0, 1);
  const double a = band_cov_functional(sp, 0.5, f, g, 0.0, 3.0), b = band_cov_functional(sp, 0.5, f, g, 3.0, INFINITY);
  EXPECT_NEAR(a + b, cov_functional(sp, 0.5, f, g), 1e-7);
}

TEST(CovFunctional, GramPsd) {
  const std::vector<TestFunction> fs{TestFunction::indicator(0, 1), TestFunction::exponential(1),
                                     TestFunction::gaussian(1, 0.5), TestFunction::polydecay(3),
                                     TestFunction::indicator(0.5, 2)};
  for (const Space& sp : {Space::half_line(), Space::full_line()}) {
    Eigen::MatrixXd G(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = i; j < 5; ++j) G(i, j) = G(j, i) = cov_functional(sp, 0.5, fs[i], fs[j]);
    EXPECT_TRUE(psd_check(G, 1e-8).pass) << sp.name();
  }
}

// S^1 pinned, H = 1/2, profile 1{|phi| <= 1}: lambda = dphi/2 on [-pi, pi], mu = |phi|,
// d = circular distance.  Independent 2-D Gauss-Kronrod over (phi, psi) with diagonal splits.
TEST(CovFunctional, CirclePinnedCap) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto k = [](double p, double q) {
    double d = std::abs(p - q);
    if (d > std::numbers::pi) d = 2 * std::numbers::pi - d;
    return std::log(std::abs(p) + std::abs(q)) - std::log(d);
  };
  auto inner = [&](double p) {
    double v = 0.0;
    const double cuts[] = {-1.0, std::min(p, 0.0), std::max(p, 0.0), 1.0};
    for (int i = 0; i < 3; ++i)
      if (cuts[i + 1] > cuts[i]) v += GK::integrate([&](double q) { return k(p, q); }, cuts[i], cuts[i + 1], 12, 1e-12);
    return v;
  };
  const double brute = 0.25 * (GK::integrate(inner, -1.0, 0.0, 12, 1e-11) + GK::integrate(inner, 0.0, 1.0, 12, 1e-11));
  const auto f = TestFunction::indicator(0, 1);
  EXPECT_NEAR(cov_functional(Space::sphere(1, SphereMode::Pinned), 0.5, f, f), brute, 1e-6);
}

TEST(CovFunctional, RejectsUncertified) {
  const auto f = TestFunction::from_callable([](double s) { return 1.0 / (1.0 + s); }, 0, INFINITY, "harmonic");
  EXPECT_THROW(cov_functional(Space::half_line(), 0.5, f, f), std::exception);
}
