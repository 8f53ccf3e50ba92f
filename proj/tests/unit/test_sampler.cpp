#include <cmath>

#include <boost/math/distributions/gamma.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsbcf/sampler.hpp"
#include "tsbcf/stats.hpp"

using namespace tsbcf;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_mu = 20;
  c.n_tau = 5;
  c.n_burn = 20;
  c.n_draws = 15;
  c.seed = 3;
  return c;
}

Eigen::Vector2d bayes_regression(const std::vector<double>& x, const std::vector<double>& e,
                                 double sigma2, double m0, double v0) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::VectorXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  Eigen::VectorXd E = Eigen::Map<const Eigen::VectorXd>(e.data(), n);
  const double prec = 1.0 / v0 + X.squaredNorm() / sigma2;
  return {(m0 / v0 + X.dot(E) / sigma2) / prec, 1.0 / prec};
}

}  // namespace

TEST(Conditionals, XiMatchesBayesRegression) {
  RngStream rng(1, 0);
  std::vector<double> mu(30), e(30);
  for (std::size_t i = 0; i < 30; ++i) {
    mu[i] = rng.normal();
    e[i] = 0.8 * mu[i] + rng.normal();
  }
  auto p = xi_posterior(mu, e, 1.7);
  auto ref = bayes_regression(mu, e, 1.7, 0.0, 1.0);
  EXPECT_NEAR(p.mean, ref[0], 1e-12);
  EXPECT_NEAR(p.var, ref[1], 1e-12);
}

TEST(Conditionals, BMatchesBayesRegression) {
  std::vector<double> tau{0.1, -0.4, 1.2, 0.3}, e{0.2, 0.1, -0.5, 0.7};
  auto p = b_posterior(tau, e, 0.9, -0.5, 0.5);
  auto ref = bayes_regression(tau, e, 0.9, -0.5, 0.5);
  EXPECT_NEAR(p.mean, ref[0], 1e-12);
  EXPECT_NEAR(p.var, ref[1], 1e-12);
  auto empty = b_posterior({}, {}, 1.0, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(empty.mean, 0.5);
  EXPECT_DOUBLE_EQ(empty.var, 0.5);
}

TEST(Conditionals, DeltaAndSigma) {
  auto d = delta_posterior(1.0, 7.0, 4, 3);
  EXPECT_DOUBLE_EQ(d.shape, 6.5);
  EXPECT_DOUBLE_EQ(d.rate, 4.0);
  auto s = sigma2_posterior(3.0, 0.5, 10.0, 20);
  EXPECT_DOUBLE_EQ(s.shape, 11.5);
  EXPECT_DOUBLE_EQ(s.rate, 5.75);
}

TEST(Conditionals, SigmaPriorLambdaCalibratesQuantile) {
  const double nu = 3.0, q = 0.9, sigma_hat = 1.3;
  const double lambda = sigma_prior_lambda(sigma_hat, nu, q);
  // 1 / sigma^2 ~ Gamma(nu / 2, rate nu lambda / 2); P(sigma <= sigma_hat) = P(prec >= 1 / sigma_hat^2).
  boost::math::gamma_distribution<double> prec(nu / 2.0, 2.0 / (nu * lambda));
  const double p = boost::math::cdf(boost::math::complement(prec, 1.0 / (sigma_hat * sigma_hat)));
  EXPECT_NEAR(p, q, 1e-9);
  EXPECT_THROW(sigma_prior_lambda(0.0, nu, q), ValidationError);
  EXPECT_THROW(sigma_prior_lambda(1.0, nu, 1.0), ValidationError);
}

TEST(Offsets, ClampedRatesPerGridPoint) {
  Dataset d;
  d.grid = TargetGrid({1.0, 2.0, 3.0});
  d.x = oracle::continuous({{0, 0, 0, 0, 0}});
  d.y = {1, 1, 0, 1, 0};
  d.z = {0, 0, 0, 0, 0};
  d.t_idx = {0, 0, 1, 1, 1};
  auto a = estimate_offsets(d);
  EXPECT_NEAR(a[0], normal_quantile(3.0 / 4.0), 1e-12);
  EXPECT_NEAR(a[1], normal_quantile(1.0 / 3.0), 1e-12);
  EXPECT_NEAR(a[2], normal_quantile(3.0 / 5.0), 1e-12);
  d.binary_outcome = false;
  d.y = {2, 4, 1, 1, 4};
  auto c = estimate_offsets(d);
  EXPECT_DOUBLE_EQ(c[0], 3.0);
  EXPECT_DOUBLE_EQ(c[1], 2.0);
}

TEST(Sampler, CounterfactualFitsDecompose) {
  RngStream rng(2, 0);
  Dataset d = oracle::random_dataset(120, 3, {0.0, 0.5, 1.0}, rng);
  auto in = standard_inputs(d);
  auto draws = run_chains(in, small_config(), 1, 1);
  ASSERT_EQ(draws.n_draws(), 15u);
  for (std::size_t r = 0; r < draws.n_draws(); ++r) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double base = draws.alpha[d.t_idx[i]] + draws.xi[r] * draws.mu(r, i);
      ASSERT_NEAR(draws.f0(r, i), base + draws.b0[r] * draws.tau(r, i), 1e-10);
      ASSERT_NEAR(draws.f1(r, i), base + draws.b1[r] * draws.tau(r, i), 1e-10);
    }
  }
}

TEST(Sampler, FitIdentityAndLatentSigns) {
  RngStream rng(3, 0);
  Dataset d = oracle::random_dataset(80, 2, {0.0, 1.0}, rng);
  Sampler s(standard_inputs(d), small_config(), RngStream(4, 0));
  for (int k = 0; k < 10; ++k) s.step();
  auto f = s.fit();
  auto mu = s.mu_forest().fit();
  auto tau = s.tau_forest().fit();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double ref = s.state().alpha[d.t_idx[i]] + s.state().xi * mu[i] + s.tau_coef(i) * tau[i];
    EXPECT_NEAR(f[i], ref, 1e-10);
    EXPECT_EQ(s.state().latent[i] > 0.0, d.y[i] == 1.0);
  }
  EXPECT_LT(s.mu_forest().cache_error(s.mu_data()), 1e-10);
  EXPECT_LT(s.tau_forest().cache_error(s.tau_data()), 1e-10);
  EXPECT_THROW(s.gibbs_sigma2(), std::logic_error);
}

TEST(Sampler, DeterministicAcrossThreadCounts) {
  RngStream rng(5, 0);
  Dataset d = oracle::random_dataset(60, 2, {0.0, 1.0}, rng);
  auto in = standard_inputs(d);
  auto a = run_chains(in, small_config(), 3, 1);
  auto b = run_chains(in, small_config(), 3, 3);
  EXPECT_EQ(a.f1.values, b.f1.values);
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_EQ(a.chain, b.chain);
  EXPECT_EQ(a.n_draws(), 45u);
  auto c = small_config();
  c.seed = 4;
  auto e = run_chains(in, c, 3, 1);
  EXPECT_NE(a.f1.values, e.f1.values);
}

TEST(Sampler, CheckFiniteThrows) {
  RngStream rng(6, 0);
  Dataset d = oracle::random_dataset(30, 1, {0.0}, rng);
  Sampler s(standard_inputs(d), small_config(), RngStream(1, 0));
  s.check_finite(0);
  s.state().xi = std::nan("");
  try {
    s.check_finite(7);
    FAIL();
  } catch (const SamplerError& e) {
    EXPECT_EQ(e.iteration(), 7);
  }
}

TEST(Sampler, RejectsMissingPropensity) {
  RngStream rng(7, 0);
  Dataset d = oracle::random_dataset(30, 1, {0.0}, rng);
  d.pi_hat.reset();
  EXPECT_THROW(standard_inputs(d), ValidationError);
}

TEST(Sampler, ContinuousModeRecoversNoise) {
  RngStream rng(8, 0);
  Dataset d = oracle::random_dataset(300, 2, {0.0, 1.0}, rng);
  d.binary_outcome = false;
  for (std::size_t i = 0; i < d.size(); ++i) d.y[i] = 2.0 * d.x(i, 0) + 0.5 * rng.normal();
  auto c = small_config();
  c.response_mode = ResponseMode::kContinuous;
  c.n_burn = 150;
  c.n_draws = 100;
  auto draws = run_chains(standard_inputs(d), c, 1, 1);
  auto m = oracle::moments(draws.sigma2);
  EXPECT_NEAR(std::sqrt(m.mean), 0.5, 0.12);
}

TEST(Sampler, ThinningKeepsEveryKth) {
  RngStream rng(9, 0);
  Dataset d = oracle::random_dataset(40, 1, {0.0}, rng);
  auto c = small_config();
  c.thin = 3;
  c.n_draws = 4;
  auto draws = run_chains(standard_inputs(d), c, 1, 1);
  EXPECT_EQ(draws.n_draws(), 4u);
}
