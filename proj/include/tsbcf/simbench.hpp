#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsbcf/config.hpp"
#include "tsbcf/data.hpp"
#include "tsbcf/estimands.hpp"
#include "tsbcf/propensity.hpp"
#include "tsbcf/random.hpp"
#include "tsbcf/sampler.hpp"

namespace tsbcf {

enum class Scenario { kA, kB, kC, kD, kE };
enum class ModelMode { kTsBcf1, kTsBcf2, kBcf, kBart };

std::string to_string(Scenario s);
std::string to_string(ModelMode m);
Scenario parse_scenario(const std::string& s);
ModelMode parse_model_mode(const std::string& s);
std::vector<Scenario> all_scenarios();
std::vector<ModelMode> all_model_modes();

/// Prognostic function shared by all scenarios.
double mu_true(double t, double x1, double x2);
double tau_true(Scenario s, double t, double x3);
/// Phi(rho (x1/6 - x2/4) + (1 - rho) s(x4)) with s(x4) = -1 if x4 > 0 else +1.
double propensity_true(double x1, double x2, double x4, double rho);

struct ScenarioSpec {
  Scenario id = Scenario::kA;
  double rho = 0.25;
  std::size_t n = 1000;
};

struct SimTruth {
  std::vector<double> mu, tau, pi, rr;
};

struct SimDataset {
  Dataset data;
  SimTruth truth;
};

/// x in R^5 iid N(0,1), t uniform on {0.1, ..., 1.0}, z ~ Bernoulli(pi), y ~ Bernoulli(Phi(mu + tau z)).
SimDataset gen_dataset(const ScenarioSpec& spec, RngStream& rng);

/// Sampler configuration for a comparator mode derived from `base`.
ModelConfig model_mode_config(ModelMode mode, const ModelConfig& base);
/// Forest covariates for a comparator mode; `d` must carry pi_hat.
ChainInputs model_mode_inputs(ModelMode mode, const Dataset& d);

struct ReplicateMetrics {
  double rmse = 0.0;
  double coverage = 0.0;
  double length = 0.0;
};

/// RMSE of posterior-mean RR against truth, 95% interval coverage and mean length over units.
ReplicateMetrics score_rr(const RRDraws& rr, const std::vector<double>& truth_rr);

struct ReplicateRecord {
  Scenario scenario = Scenario::kA;
  ModelMode model = ModelMode::kTsBcf1;
  int replicate = 0;
  bool ok = false;
  std::string error;
  ReplicateMetrics metrics;
  std::vector<double> rr_curve;  // posterior-mean RR per grid point
};

struct MetricsRow {
  Scenario scenario = Scenario::kA;
  ModelMode model = ModelMode::kTsBcf1;
  double rmse_mean = 0.0;
  double rmse_sd = 0.0;
  double coverage = 0.0;
  double length = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct BenchmarkConfig {
  std::vector<Scenario> scenarios = all_scenarios();
  std::vector<ModelMode> models = all_model_modes();
  std::size_t n = 1000;
  int replicates = 10;
  double rho = 0.25;
  std::uint64_t seed = 1;
  int threads = 1;
  ModelConfig sampler;
  PropensityOptions propensity;

  void validate() const;
};

/// Default sampler settings for benchmark runs (desk-scale chain lengths).
ModelConfig default_benchmark_sampler();

struct BenchmarkResult {
  std::vector<MetricsRow> rows;
  std::vector<ReplicateRecord> replicates;
};

/// Every (scenario, replicate) pair is an independent job with streams derived from
/// (seed, scenario, replicate), so results do not depend on the thread count.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

}  // namespace tsbcf
