#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsbcf/random.hpp"
#include "tsbcf/stats.hpp"

using namespace tsbcf;

TEST(RngStream, SameSeedSameStream) {
  RngStream a(5, 3), b(5, 3), c(5, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs |= x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(RngStream, UniformOpenInterval) {
  RngStream r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RngStream, GammaMoments) {
  RngStream r(2, 0);
  std::vector<double> v(20000);
  for (double& x : v) x = r.gamma(3.0, 2.0);
  auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 1.5, 4 * m.se_mean);
  EXPECT_NEAR(m.var, 0.75, 4 * m.se_var);
}

TEST(TruncatedNormal, RespectsSideAndMoments) {
  RngStream r(3, 0);
  std::vector<double> v(20000);
  for (double& x : v) {
    x = sample_truncated_normal(r, 0.3, 1.0, Truncation::kAboveZero);
    ASSERT_GT(x, 0.0);
  }
  // E[X | X > 0] for N(0.3, 1): 0.3 + phi(0.3) / Phi(0.3)
  const double a = -0.3;
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2 * M_PI);
  const double expected = 0.3 + phi / normal_cdf(0.3);
  auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, expected, 4 * m.se_mean);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_LT(sample_truncated_normal(r, 0.3, 1.0, Truncation::kBelowZero), 0.0);
  }
}

TEST(TruncatedNormal, ExtremeTailsTerminate) {
  RngStream r(4, 0);
  for (int i = 0; i < 1000; ++i) {
    double x = sample_truncated_normal(r, -40.0, 1.0, Truncation::kAboveZero);
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
    double lo = sample_standard_normal_above(r, 12.0);
    ASSERT_GT(lo, 12.0);
  }
}

TEST(TruncatedNormal, DeepTailMean) {
  RngStream r(5, 0);
  std::vector<double> v(20000);
  for (double& x : v) x = sample_standard_normal_above(r, 6.0);
  // Mills ratio: E[X | X > a] = phi(a) / (1 - Phi(a))
  const double a = 6.0;
  const double tail = 0.5 * std::erfc(a / std::sqrt(2.0));
  const double expected = std::exp(-0.5 * a * a) / std::sqrt(2 * M_PI) / tail;
  auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, expected, 4 * m.se_mean);
}

TEST(InverseGamma, Moments) {
  RngStream r(6, 0);
  std::vector<double> v(40000);
  for (double& x : v) x = sample_inverse_gamma(r, 6.0, 10.0);
  auto m = oracle::moments(v);
  EXPECT_NEAR(m.mean, 2.0, 4 * m.se_mean);
  EXPECT_NEAR(m.var, 1.0, 5 * m.se_var);
}

TEST(Mvn, CholeskyCovariance) {
  RngStream r(7, 0);
  Eigen::MatrixXd C(2, 2);
  C << 2.0, 0.6, 0.6, 1.0;
  Eigen::MatrixXd L = C.llt().matrixL();
  Eigen::VectorXd mu(2);
  mu << 1.0, -1.0;
  const int n = 40000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = sample_mvn_cholesky(r, mu, L);
    s += x;
    acc += (x - mu) * (x - mu).transpose();
  }
  s /= n;
  acc /= n;
  EXPECT_NEAR(s[0], 1.0, 0.03);
  EXPECT_NEAR(s[1], -1.0, 0.03);
  EXPECT_NEAR(acc(0, 1), 0.6, 0.04);
  EXPECT_NEAR(acc(0, 0), 2.0, 0.06);
}

TEST(Stats, NormalFunctions) {
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-10);
  EXPECT_NEAR(log_normal_cdf(-30.0), std::log(0.5 * std::erfc(30.0 / std::sqrt(2.0))), 1e-8);
  EXPECT_TRUE(std::isfinite(log_normal_cdf(-60.0)));
}

TEST(Stats, QuantileType7) {
  std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(variance(std::vector<double>{1.0}), 0.0);
  EXPECT_DOUBLE_EQ(variance(std::vector<double>{1.0, 3.0}), 2.0);
}

TEST(Stats, ChiSquareAgreesWithBoost) {
  std::vector<double> obs{10, 12, 8, 10}, p{0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(chi_square_gof_pvalue(obs, p), oracle::chi_square_pvalue(obs, p), 1e-10);
  EXPECT_NEAR(chi_square_upper(3.84145882069412, 1.0), 0.05, 1e-9);
}

TEST(Stats, SummarizeDraws) {
  std::vector<double> v;
  for (int i = 0; i <= 1000; ++i) v.push_back(i);
  auto s = summarize_draws(v);
  EXPECT_DOUBLE_EQ(s.mean, 500.0);
  EXPECT_NEAR(s.lo, 25.0, 1e-9);
  EXPECT_NEAR(s.hi, 975.0, 1e-9);
}
