#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "logcorr/test_function.hpp"

using namespace logcorr;
using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

namespace {
// Gauss-Kronrod split at the function's breakpoints.
template <class F>
double gk_split(const TestFunction& f, F g, double lo, double hi) {
  std::vector<double> cuts{lo};
  for (double b : f.breakpoints())
    if (b > lo && b < hi) cuts.push_back(b);
  cuts.push_back(hi);
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) v += GK::integrate(g, cuts[i], cuts[i + 1], 20, 1e-14);
  return v;
}
}  // namespace

TEST(TestFunction, ParseAndEvaluate) {
  const auto f = parse_test_function("indicator:0,1");
  EXPECT_EQ(f(0.5), 1.0);
  EXPECT_EQ(f(1.5), 0.0);
  EXPECT_NEAR(parse_test_function("exp:2")(0.5), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(parse_test_function("polydecay:3")(1.0), 0.125, 1e-15);
  EXPECT_NEAR(parse_test_function("3*exp:1")(0.0), 3.0, 1e-15);
  EXPECT_TRUE(parse_test_function("zero").is_zero());
  EXPECT_THROW(parse_test_function("indicator:0"), std::invalid_argument);
  EXPECT_THROW(parse_test_function("wave:1"), std::invalid_argument);
  EXPECT_THROW(parse_test_function("exp"), std::invalid_argument);
}

TEST(TestFunction, CertifiedFamilies) {
  EXPECT_TRUE(TestFunction::indicator(0, 1).certified());
  EXPECT_TRUE(TestFunction::exponential(1).certified());
  EXPECT_TRUE(TestFunction::polydecay(3).certified());
  EXPECT_FALSE(TestFunction::from_callable([](double) { return 1.0; }, 0, 1, "one").certified());
}

TEST(TestFunction, IntegralsAgainstQuadrature) {
  for (const char* spec : {"exp:1.5", "gauss:1,0.5", "polydecay:2.5", "indicator:0.2,3"}) {
    const auto f = parse_test_function(spec);
    const double q = gk_split(f, [&](double s) { return f(s); }, 0.2, 4.0);
    EXPECT_NEAR(f.integral(0.2, 4.0), q, 1e-10) << spec;
    EXPECT_NEAR(f.antiderivative(4.0) - f.antiderivative(0.2), q, 1e-10) << spec;
  }
}

TEST(TestFunction, LaplaceAgainstQuadrature) {
  for (const char* spec : {"exp:1", "gauss:2,0.7", "polydecay:3", "indicator:0.5,2"}) {
    const auto f = parse_test_function(spec);
    for (double z : {0.0, 0.3, 2.0, 10.0}) {
      const double q = gk_split(f, [&](double s) { return f(s) * std::exp(-z * s); }, 0.0,
                                std::numeric_limits<double>::infinity());
      EXPECT_NEAR(f.laplace(z), q, 1e-9 * std::max(1.0, std::abs(q))) << spec << " z=" << z;
    }
  }
}

TEST(TestFunction, TailBound) {
  const auto f = TestFunction::exponential(1.0);
  const double T = f.tail_hi(1e-10);
  const double tail = GK::integrate([](double s) { return std::exp(-s) * (1 + std::log1p(s)); }, T,
                                    std::numeric_limits<double>::infinity());
  EXPECT_LE(tail, 1e-10);
  EXPECT_GT(tail, 1e-13);  // not absurdly conservative
}

TEST(TestFunction, LinearCombination) {
  const auto f = TestFunction::indicator(0, 1) + TestFunction::exponential(1).scaled(2.0);
  EXPECT_NEAR(f(0.5), 1.0 + 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(f.integral(0, 1), 1.0 + 2.0 * (1 - std::exp(-1.0)), 1e-14);
}
