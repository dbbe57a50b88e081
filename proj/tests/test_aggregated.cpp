#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "logcorr/acceptance.hpp"
#include "logcorr/aggregated.hpp"

using namespace logcorr;

TEST(CellWeights, Indicator) {
  const auto w = f_cell_weights(TestFunction::indicator(0, 1), 4);
  ASSERT_EQ(w.size(), 4u);
  for (double v : w.w) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_NEAR(w.total(), 1.0, 1e-15);
  EXPECT_NEAR(f_cell_weights(TestFunction::exponential(1), 256).total(), 1.0, 1e-10);
}

// Values from an independent 2^J enumeration in another language, weights (1, 1).
TEST(PsiSecondMoment, SmallCases) {
  const auto w = make_cell_weights({1.0, 1.0}, 1);
  EXPECT_NEAR(exact_psi_second_moment(w, 0.1), 1.5264, 1e-12);
  EXPECT_NEAR(exact_psi_second_moment(w, 0.3), 2.4864, 1e-12);
  EXPECT_NEAR(exact_psi_second_moment(w, 0.7), 1.1424, 1e-12);
}

TEST(PsiSecondMoment, HalfIsSumOfSquares) {
  const auto w = make_cell_weights({0.3, -1.2, 2.0, 0.5}, 1);
  double ss = 0.0;
  for (double v : w.w) ss += v * v;
  EXPECT_NEAR(exact_psi_second_moment(w, 0.5), ss, 1e-14);
}

TEST(PsiSecondMoment, EnumerationProperty) {
  RngStream s(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t J = 1 + static_cast<std::size_t>(s.uniform() * 10);
    std::vector<double> w(J);
    for (auto& v : w) v = s.gaussian();
    const double r = s.uniform();
    EXPECT_NEAR(exact_psi_second_moment(make_cell_weights(w, 1), r),
                acceptance::enumerate_psi_second_moment(w, r), 1e-12);
  }
}

TEST(PsiSecondMoment, LongRunsMatchDirectSum) {
  // Run-length path (constant weights) against a padded, non-constant twin.
  auto w = std::vector<double>(3000, 0.01);
  auto v = w;
  v.push_back(1e-300);
  for (double r : {1e-5, 1e-3, 0.2, 0.9}) {
    EXPECT_NEAR(exact_psi_second_moment(make_cell_weights(w, 1), r),
                exact_psi_second_moment(make_cell_weights(v, 1), r), 1e-11) << r;
  }
}

TEST(ExactVariance, ConvergesToTwoLog2) {
  const auto f = TestFunction::indicator(0, 1);
  EXPECT_NEAR(exact_variance_G_n(f, 4096), 2 * std::numbers::ln2, 2e-2);
  EXPECT_NEAR(exact_variance_G_n(f, 4096), 1.3847047810, 1e-8);
  EXPECT_NEAR(exact_variance_G_n(f.scaled(3.0), 256), 9.0 * exact_variance_G_n(f, 256), 1e-10);
}

TEST(SimulateGn, ZeroFunctionGivesZeros) {
  AggregatedPlan p;
  p.n = 64;
  p.m = 1024;
  p.reps = 50;
  p.fs = {TestFunction::zero()};
  const auto r = simulate_G_n(p);
  for (double v : r.samples.data) EXPECT_EQ(v, 0.0);
}

TEST(SimulateGn, VarianceMatchesExactMoment) {
  AggregatedPlan p;
  p.n = 64;
  p.m = 4096;
  p.reps = 4000;
  p.r_star = 1e9;  // no closure: every layer is simulated
  p.fs = {TestFunction::indicator(0, 1)};
  const auto r = simulate_G_n(p);
  const auto v = variance_se(r.samples.column(0));
  const double exact = exact_variance_G_n(f_cell_weights(p.fs[0], p.n));
  EXPECT_LT(std::abs(v.mean - exact), 4 * v.se) << v.mean << " vs " << exact;
}

TEST(SimulateGn, ClosureMatchesExactMoment) {
  AggregatedPlan p;
  p.n = 256;
  p.m = 8192;
  p.reps = 4000;
  p.r_star = 8;
  p.fs = {TestFunction::indicator(0, 1), TestFunction::exponential(2)};
  const auto r = simulate_G_n(p);
  for (int k = 0; k < 2; ++k) {
    const auto v = variance_se(r.samples.column(k));
    const double exact = exact_variance_G_n(f_cell_weights(p.fs[k], p.n));
    EXPECT_LT(std::abs(v.mean - exact), 4 * v.se) << k;
  }
}

TEST(SimulateGn, ThreadInvariant) {
  AggregatedPlan p;
  p.n = 128;
  p.m = 2048;
  p.reps = 64;
  p.fs = {TestFunction::indicator(0, 1)};
  p.threads = 1;
  const auto a = simulate_G_n(p);
  p.threads = 3;
  const auto b = simulate_G_n(p);
  EXPECT_EQ(a.samples.data, b.samples.data);
}

TEST(SimulateGn, RegimeWarning) {
  AggregatedPlan p;
  p.n = 64;
  p.m = 128;
  p.reps = 10;
  p.fs = {TestFunction::indicator(0, 1)};
  EXPECT_FALSE(simulate_G_n(p).warnings.empty());
}

TEST(RingRule, ReproducesSphereCovariance) {
  const Space sp = Space::sphere(2, SphereMode::RotationInvariant);
  const auto f = TestFunction::indicator(0, 1);
  AggregatedPlan p;
  p.space = sp;
  p.n = 16;
  p.m = 512;
  p.r_star = 1;
  p.reps = 4;
  p.fs = {f};
  const auto r = simulate_general_G_n(p);
  EXPECT_NEAR(r.diagnostics["ring_rule_cov"][0][0].get<double>(), cov_functional(sp, 0.5, f, f), 5e-4);
}

TEST(SimulateGeneral, HalfLineVarianceMatchesFiniteN) {
  AggregatedPlan p;
  p.n = 128;
  p.m = 4096;
  p.reps = 3000;
  p.fs = {TestFunction::indicator(0, 1)};
  const auto r = simulate_general_G_n(p);
  const auto v = variance_se(r.samples.column(0));
  const double target = r.diagnostics["finite_n_cov"][0][0].get<double>();
  EXPECT_LT(std::abs(v.mean - target), 4 * v.se) << v.mean << " vs " << target;
}

TEST(SimulateGeneral, ZeroFunctionGivesZeros) {
  AggregatedPlan p;
  p.space = Space::sphere(2, SphereMode::Pinned);
  p.n = 16;
  p.m = 256;
  p.reps = 20;
  p.fs = {TestFunction::zero()};
  const auto r = simulate_general_G_n(p);
  for (double v : r.samples.data) EXPECT_EQ(v, 0.0);
}
