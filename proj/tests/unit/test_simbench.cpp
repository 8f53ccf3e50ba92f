#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "tsbcf/simbench.hpp"

using namespace tsbcf;

TEST(Scenarios, TreatmentFunctions) {
  EXPECT_NEAR(tau_true(Scenario::kB, 0.0, 1.0), 0.45, 1e-12);
  EXPECT_NEAR(tau_true(Scenario::kC, 0.5, 0.0), 0.4 - 0.05 * std::sin(0.75 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(tau_true(Scenario::kC, 0.5, 0.0), 0.3646, 1e-4);
  EXPECT_NEAR(tau_true(Scenario::kD, 0.0, -1.0), 0.05, 1e-12);
  EXPECT_EQ(tau_true(Scenario::kE, 0.7, 3.0), 0.1);
  EXPECT_NEAR(mu_true(1.0, 6.0, 4.0), 2.25, 1e-12);
  EXPECT_NEAR(propensity_true(0.0, 0.0, 1.0, 0.25), normal_cdf(-0.75), 1e-12);
}

TEST(Scenarios, Parsing) {
  EXPECT_EQ(parse_scenario("C"), Scenario::kC);
  EXPECT_EQ(parse_model_mode("BCF-mode"), ModelMode::kBcf);
  EXPECT_EQ(parse_model_mode("tsBCF2"), ModelMode::kTsBcf2);
  EXPECT_EQ(parse_model_mode(to_string(ModelMode::kBart)), ModelMode::kBart);
  EXPECT_THROW(parse_scenario("F"), ValidationError);
  EXPECT_THROW(parse_model_mode("forest"), ValidationError);
  EXPECT_EQ(all_scenarios().size() * all_model_modes().size(), 20u);
}

TEST(GenDataset, ShapeAndTruth) {
  RngStream rng(1, 0);
  auto sim = gen_dataset(ScenarioSpec{Scenario::kC, 0.25, 500}, rng);
  const Dataset& d = sim.data;
  EXPECT_EQ(d.size(), 500u);
  EXPECT_EQ(d.grid.size(), 10u);
  EXPECT_EQ(d.x.n_cols, 5u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double t = d.grid[d.t_idx[i]];
    EXPECT_DOUBLE_EQ(sim.truth.mu[i], mu_true(t, d.x(i, 0), d.x(i, 1)));
    EXPECT_DOUBLE_EQ(sim.truth.tau[i], tau_true(Scenario::kC, t, d.x(i, 2)));
    EXPECT_NEAR(sim.truth.rr[i], normal_cdf(sim.truth.mu[i] + sim.truth.tau[i]) / normal_cdf(sim.truth.mu[i]), 1e-12);
    EXPECT_GT(sim.truth.rr[i], 1.0);
  }
  RngStream again(1, 0);
  EXPECT_EQ(gen_dataset(ScenarioSpec{Scenario::kC, 0.25, 500}, again).data.y, d.y);
}

TEST(ModelModes, ConfigAndInputs) {
  RngStream rng(2, 0);
  auto sim = gen_dataset(ScenarioSpec{Scenario::kA, 0.25, 50}, rng);
  sim.data.pi_hat = std::vector<double>(50, 0.5);
  ModelConfig base;
  EXPECT_EQ(model_mode_config(ModelMode::kTsBcf2, base).kappa_tau, 3.0);
  auto bcf = model_mode_config(ModelMode::kBcf, base);
  EXPECT_TRUE(bcf.constant_leaves_mu && bcf.constant_leaves_tau);
  auto bart = model_mode_config(ModelMode::kBart, base);
  EXPECT_FALSE(bart.use_tau_forest);
  auto in = model_mode_inputs(ModelMode::kBart, sim.data);
  ASSERT_TRUE(in.z_column.has_value());
  EXPECT_EQ(in.mu_x.names[*in.z_column], "z");
  EXPECT_EQ(in.mu_x.n_cols, 8u);
  EXPECT_EQ(model_mode_inputs(ModelMode::kTsBcf1, sim.data).mu_x.n_cols, 6u);
  EXPECT_EQ(model_mode_inputs(ModelMode::kBcf, sim.data).tau_x.names.back(), "t");
}

TEST(ScoreRr, HandComputed) {
  RRDraws rr;
  rr.rr = DrawMatrix(3, 2);
  const double v[6] = {1.0, 2.0, 1.0, 2.0, 1.0, 2.0};
  std::copy(v, v + 6, rr.rr.values.begin());
  auto m = score_rr(rr, {1.0, 3.0});
  EXPECT_NEAR(m.rmse, std::sqrt(0.5), 1e-12);
  EXPECT_DOUBLE_EQ(m.coverage, 0.5);
  EXPECT_DOUBLE_EQ(m.length, 0.0);
}

TEST(Benchmark, ValidationRejectsZeroDraws) {
  BenchmarkConfig c;
  c.sampler = default_benchmark_sampler();
  c.sampler.n_draws = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.sampler.n_draws = 10;
  c.scenarios.clear();
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Benchmark, SmallRunIsThreadIndependent) {
  BenchmarkConfig c;
  c.scenarios = {Scenario::kE};
  c.models = {ModelMode::kBcf, ModelMode::kBart};
  c.n = 120;
  c.replicates = 2;
  c.sampler = default_benchmark_sampler();
  c.sampler.n_mu = 20;
  c.sampler.n_tau = 5;
  c.sampler.n_burn = 30;
  c.sampler.n_draws = 30;
  c.propensity.n_trees = 20;
  c.propensity.n_burn = 30;
  c.propensity.n_draws = 30;
  auto a = run_benchmark(c);
  c.threads = 2;
  auto b = run_benchmark(c);
  ASSERT_EQ(a.rows.size(), 2u);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].n_ok, 2);
    EXPECT_TRUE(std::isfinite(a.rows[k].rmse_mean));
    EXPECT_EQ(a.rows[k].rmse_mean, b.rows[k].rmse_mean);
    EXPECT_EQ(a.rows[k].length, b.rows[k].length);
  }
  ASSERT_EQ(a.replicates.size(), 4u);
  EXPECT_EQ(a.replicates[0].rr_curve.size(), 10u);
}
