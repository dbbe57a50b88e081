#include <gtest/gtest.h>

#include <cmath>

#include "logcorr/rng.hpp"
#include "logcorr/stats.hpp"

using namespace logcorr;

TEST(EmpiricalCov, ConstantAndIndependentColumns) {
  RngStream s(1);
  SampleMatrix m(100000, 3);
  for (std::size_t i = 0; i < m.rows; ++i) {
    m(i, 0) = 2.5;
    m(i, 1) = s.gaussian();
    m(i, 2) = s.gaussian();
  }
  const auto c = empirical_cov(m);
  EXPECT_EQ(c.cov(0, 0), 0.0);
  EXPECT_LT(std::abs(c.cov(1, 1) - 1.0), 4 * c.se(1, 1));
  EXPECT_LT(std::abs(c.cov(1, 2)), 4 * c.se(1, 2));
}

TEST(EmpiricalChf, ExactAtZeroAndAntisymmetric) {
  RngStream s(2);
  std::vector<double> x(100000);
  for (auto& v : x) v = s.gaussian();
  const auto p = empirical_chf(x, {0.0, 1.0, -1.0});
  EXPECT_EQ(p[0].re, 1.0);
  EXPECT_EQ(p[0].im, 0.0);
  EXPECT_LT(std::abs(p[1].re - std::exp(-0.5)), 4 * p[1].se_re);
  EXPECT_EQ(p[2].im, -p[1].im);
}

TEST(VarianceSe, MatchesGaussianTheory) {
  // For Gaussian data the fourth-moment SE approaches sqrt(2/n) sigma^2.
  RngStream s(4);
  std::vector<double> x(200000);
  for (auto& v : x) v = 3.0 * s.gaussian();
  const auto v = variance_se(x);
  EXPECT_NEAR(v.se, 9.0 * std::sqrt(2.0 / x.size()), 0.05 * v.se);
}

TEST(PsdCheck, Examples) {
  EXPECT_NEAR(psd_check(Eigen::MatrixXd::Identity(4, 4), 1e-10).min_eigenvalue, 1.0, 1e-15);
  Eigen::VectorXd u(3);
  u << 1, 2, 3;
  const auto r = psd_check(u * u.transpose(), 1e-10);
  EXPECT_NEAR(r.min_eigenvalue, 0.0, 1e-12);
  EXPECT_TRUE(r.pass);
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 0, 1;
  EXPECT_THROW(psd_check(a, 1e-10), std::invalid_argument);
}

TEST(PsdFactor, ReproducesMatrixAndClips) {
  Eigen::MatrixXd c(3, 3);
  c << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  const auto L = psd_factor(c);
  EXPECT_LT((L * L.transpose() - c).cwiseAbs().maxCoeff(), 1e-13);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1e-12;
  EXPECT_NO_THROW(psd_factor(d));
  d(1, 1) = -1e-3;
  EXPECT_THROW(psd_factor(d), std::runtime_error);
}

TEST(EstimateReport, JsonRoundTrip) {
  EstimateReport r;
  r.name = "var[indicator:0,1]";
  r.estimate = 1.3862943611198906;
  r.se = 0.1 / 3.0;
  r.n = 12345;
  r.seed = 0xFFFFFFFFFFFFull;
  r.plan = {{"bins", 400}};
  r.set_target(2 * std::log(2.0));
  const auto j = nlohmann::json(r);
  const auto back = j.get<EstimateReport>();
  EXPECT_EQ(back.name, r.name);
  EXPECT_EQ(back.estimate, r.estimate);
  EXPECT_EQ(back.se, r.se);
  EXPECT_EQ(back.n, r.n);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_EQ(*back.target, *r.target);
  EXPECT_EQ(*back.z, *r.z);
  EXPECT_EQ(back.plan, r.plan);
  // Through text as well.
  const auto again = nlohmann::json::parse(j.dump()).get<EstimateReport>();
  EXPECT_EQ(again.estimate, r.estimate);
  EXPECT_EQ(*again.z, *r.z);
  EstimateReport none;
  none.name = "x";
  EXPECT_TRUE(nlohmann::json(none)["target"].is_null());
  EXPECT_FALSE(nlohmann::json(none).get<EstimateReport>().target.has_value());
}
