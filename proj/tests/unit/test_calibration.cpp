#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsbcf/calibration.hpp"
#include "tsbcf/propensity.hpp"
#include "tsbcf/stats.hpp"

using namespace tsbcf;

namespace {

PosteriorDraws two_unit_draws(std::vector<double> mu, std::vector<double> tau) {
  PosteriorDraws d;
  d.f0 = DrawMatrix(1, mu.size());
  d.f1 = DrawMatrix(1, mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    d.f0(0, i) = mu[i];
    d.f1(0, i) = mu[i] + tau[i];
  }
  d.mu = d.f0;
  return d;
}

Dataset holdout_with_effects(const std::vector<double>& base, const std::vector<double>& effect,
                             std::size_t per_arm, RngStream& rng) {
  Dataset d;
  std::vector<double> grid;
  for (std::size_t k = 0; k < base.size(); ++k) grid.push_back(static_cast<double>(k));
  d.grid = TargetGrid(grid);
  std::vector<double> col;
  for (std::size_t k = 0; k < base.size(); ++k) {
    for (int arm = 0; arm < 2; ++arm) {
      const double p = normal_cdf(base[k] + arm * effect[k]);
      for (std::size_t i = 0; i < per_arm; ++i) {
        d.y.push_back(rng.bernoulli(p) ? 1.0 : 0.0);
        d.z.push_back(arm);
        d.t_idx.push_back(k);
        col.push_back(0.0);
      }
    }
  }
  d.x = oracle::continuous({col});
  return d;
}

}  // namespace

TEST(Elicitation, SMuFormula) {
  const double expected = (normal_quantile(0.999) - normal_quantile(0.860)) / 3.3;
  EXPECT_NEAR(s_mu_from_elicitation(0.860, 0.999), expected, 1e-12);
  EXPECT_NEAR(s_mu_from_elicitation(0.860, 0.999), 0.6090, 5e-4);
  EXPECT_NEAR(s_mu_from_elicitation(0.5, normal_cdf(3.3)), 1.0, 1e-9);
  EXPECT_THROW(s_mu_from_elicitation(0.5, 0.5), ValidationError);
}

TEST(TauCalibration, DegenerateTargetHitsFloor) {
  RngStream rng(1, 0);
  Dataset d;
  d.grid = TargetGrid({0.0, 1.0, 2.0});
  std::vector<double> col;
  for (std::size_t k = 0; k < 3; ++k) {
    for (int arm = 0; arm < 2; ++arm) {
      for (int i = 0; i < 10; ++i) {
        d.y.push_back(i < 6 ? 1.0 : 0.0);
        d.z.push_back(arm);
        d.t_idx.push_back(k);
        col.push_back(0.0);
      }
    }
  }
  d.x = oracle::continuous({col});
  auto spread = latent_effect_spread(d);
  EXPECT_EQ(spread.usable_points, 3u);
  EXPECT_NEAR(spread.sd, 0.0, 1e-15);
  auto c = s_tau_calibrate(d, 0.6);
  EXPECT_FALSE(c.fallback);
  EXPECT_NEAR(c.s_tau, 0.01, 1e-12);
}

TEST(TauCalibration, EngineeredSpread) {
  RngStream rng(2, 0);
  std::vector<double> base(10, 0.3), effect;
  for (int k = 0; k < 10; ++k) effect.push_back(0.3 * (k - 4.5) / std::sqrt(9.1666666666666));
  Dataset d = holdout_with_effects(base, effect, 2000, rng);
  auto c = s_tau_calibrate(d, 0.6);
  EXPECT_FALSE(c.fallback);
  EXPECT_GE(c.s_tau, 0.15);
  EXPECT_LE(c.s_tau, 0.6);
  EXPECT_NEAR(c.target_sd, 0.3, 0.05);
}

TEST(TauCalibration, SingleArmFallsBack) {
  RngStream rng(3, 0);
  Dataset d = holdout_with_effects({0.0, 0.1}, {0.0, 0.0}, 20, rng);
  for (int& z : d.z) z = 1;
  auto c = s_tau_calibrate(d, 0.6);
  EXPECT_TRUE(c.fallback);
  EXPECT_DOUBLE_EQ(c.s_tau, 0.3);
  EXPECT_FALSE(c.warning.empty());
}

TEST(TauCalibration, ObjectiveMinimumAtScaledTarget) {
  EXPECT_NEAR(s_tau_objective(0.3 / std::sqrt(2.0), 0.3), 0.0, 1e-15);
  EXPECT_GT(s_tau_objective(0.3, 0.3), 0.0);
}

TEST(HeterogeneityRatio, ConstantEffectIsOne) {
  auto d = two_unit_draws({0.0, 1.0, -0.3}, {0.4, 0.4, 0.4});
  auto h = structural_heterogeneity_ratio(d);
  EXPECT_EQ(h.ratio, 1.0);
  EXPECT_EQ(h.used_draws, 1u);
}

TEST(HeterogeneityRatio, ZeroHomogeneousVarianceExcluded) {
  auto d = two_unit_draws({0.0, 0.0}, {0.5, -0.5});
  auto h = structural_heterogeneity_ratio(d);
  EXPECT_EQ(h.excluded_draws, 1u);
  EXPECT_EQ(h.used_draws, 0u);
}

TEST(HeterogeneityRatio, HandArithmetic) {
  auto d = two_unit_draws({0.0, 1.0}, {0.2, 0.6});
  const double h0 = normal_cdf(0.2) / normal_cdf(0.0), h1 = normal_cdf(1.6) / normal_cdf(1.0);
  const double g0 = normal_cdf(0.4) / normal_cdf(0.0), g1 = normal_cdf(1.4) / normal_cdf(1.0);
  const double expected = (h0 - h1) * (h0 - h1) / ((g0 - g1) * (g0 - g1));
  EXPECT_NEAR(structural_heterogeneity_ratio(d).ratio, expected, 1e-10);
}

TEST(HeterogeneityGrid, DegenerateCases) {
  RngStream rng(4, 0);
  auto rows = structural_heterogeneity_grid({-1.0, 1.0}, {0.0, 0.3}, {0.0, 0.5}, 50, rng);
  ASSERT_EQ(rows.size(), 2u * 2u * 2u * 50u);
  for (const auto& r : rows) {
    if (r.tau == 0.0) {
      EXPECT_NEAR(r.rr, 1.0, 1e-14);
    }
    if (r.mu_sd == 0.0) {
      EXPECT_NEAR(r.rr, normal_cdf(r.alpha + r.tau) / normal_cdf(r.alpha), 1e-12);
    }
  }
}

TEST(Propensity, IndependentAssignmentRecoversRate) {
  RngStream rng(5, 0);
  Dataset d = oracle::random_dataset(2000, 3, {0.0, 1.0}, rng);
  for (int& z : d.z) z = rng.bernoulli(0.3) ? 1 : 0;
  d.pi_hat.reset();
  auto fit = fit_propensity(d);
  ASSERT_EQ(fit.pi_hat.size(), 2000u);
  EXPECT_NEAR(mean(fit.pi_hat), 0.3, 0.02);
  EXPECT_GT(quantile(fit.pi_hat, 0.025), 0.15);
  EXPECT_LT(quantile(fit.pi_hat, 0.975), 0.45);
}

TEST(Propensity, SingleArmIsNoOverlap) {
  RngStream rng(6, 0);
  Dataset d = oracle::random_dataset(50, 1, {0.0}, rng);
  for (int& z : d.z) z = 1;
  try {
    fit_propensity(d);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("no overlap"), std::string::npos);
  }
}

TEST(Propensity, TracksConfounding) {
  RngStream rng(7, 0);
  Dataset d = oracle::random_dataset(600, 2, {0.0}, rng);
  for (std::size_t i = 0; i < d.size(); ++i) d.z[i] = rng.bernoulli(normal_cdf(1.5 * d.x(i, 0))) ? 1 : 0;
  PropensityOptions o;
  o.n_trees = 50;
  o.n_burn = 150;
  o.n_draws = 150;
  auto fit = fit_propensity(d, o);
  double err = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) err += std::abs(fit.pi_hat[i] - normal_cdf(1.5 * d.x(i, 0)));
  EXPECT_LT(err / static_cast<double>(d.size()), 0.1);
}
