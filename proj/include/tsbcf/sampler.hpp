#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsbcf/config.hpp"
#include "tsbcf/data.hpp"
#include "tsbcf/forest.hpp"
#include "tsbcf/kernel.hpp"
#include "tsbcf/random.hpp"

namespace tsbcf {

/// Raised when the chain produces a non-finite state. The CLI maps it to exit code 2.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Dense row-major matrix of draws (rows) by units (columns).
struct DrawMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DrawMatrix() = default;
  DrawMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  void append_row(std::span<const double> row);
  std::vector<double> column(std::size_t c) const;
  std::vector<double> column_means() const;
};

struct MoveCounts {
  std::size_t grow_proposed = 0;
  std::size_t grow_accepted = 0;
  std::size_t prune_proposed = 0;
  std::size_t prune_accepted = 0;

  void record(const MoveResult& move);
  double acceptance_rate() const;
  MoveCounts& operator+=(const MoveCounts& other);
};

/// Retained posterior draws. mu and tau are raw forest fits; f0 and f1 are the latent fits
/// under control and treatment, f_z = alpha_t + xi * mu + (b1 z + b0 (1 - z)) * tau.
struct PosteriorDraws {
  DrawMatrix mu, tau, f0, f1;
  std::vector<double> alpha;  // per grid point, fixed during the chain
  std::vector<std::size_t> t_idx;
  std::vector<double> xi, b0, b1, delta_mu, delta_tau, sigma2;
  std::vector<int> chain;  // chain id per draw
  MoveCounts mu_moves, tau_moves;
  std::uint64_t seed = 0;

  std::size_t n_draws() const { return mu.rows; }
  std::size_t n_units() const { return mu.cols; }
  void append(const PosteriorDraws& other);
};

struct NormalPosterior {
  double mean = 0.0;
  double var = 1.0;
};

/// xi | rest with prior N(0, 1) and regression e_i = xi * mu_i + N(0, sigma2).
NormalPosterior xi_posterior(std::span<const double> mu, std::span<const double> e, double sigma2);

/// b | rest with prior N(prior_mean, prior_var) and regression e_i = b * tau_i + N(0, sigma2).
NormalPosterior b_posterior(std::span<const double> tau, std::span<const double> e, double sigma2,
                            double prior_mean, double prior_var);

/// Shape and rate of the gamma full conditional of a precision-type parameter.
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

/// Delta | curves ~ Gamma((nu + n_bots T) / 2, rate (nu + ssq) / 2), i.e. 1/Delta is
/// inverse-gamma with the same parameters. `ssq` uses the kernel precision at Delta = 1.
GammaParams delta_posterior(double nu, double ssq, std::size_t n_bots, std::size_t dim);

/// sigma2 | rest ~ IG((nu + n) / 2, (rss + nu * lambda) / 2), returned as shape and scale.
GammaParams sigma2_posterior(double nu, double lambda, double rss, std::size_t n);

/// lambda such that P(sigma <= sigma_hat) = q under the IG(nu / 2, nu * lambda / 2) prior.
double sigma_prior_lambda(double sigma_hat, double nu, double q);

/// Residual standard deviation of an OLS fit of y on an intercept, x and the target value.
double ols_residual_sd(const Dataset& d);

/// Offsets alpha_t = Phi^-1 of the clamped success rate per grid point.
std::vector<double> estimate_offsets(const Dataset& d);

/// Everything a chain needs besides the configuration.
struct ChainInputs {
  const Dataset* data = nullptr;
  Covariates mu_x;   // prognostic covariates, usually (x, pi_hat)
  Covariates tau_x;  // treatment-effect covariates, usually x
  /// Column of mu_x holding z when a single forest models the whole response surface.
  std::optional<std::size_t> z_column;
};

/// Covariates (x, pi_hat) and x for a dataset; pi_hat is required.
ChainInputs standard_inputs(const Dataset& d);

struct SamplerState {
  std::vector<double> latent;
  std::vector<double> alpha;
  double xi = 1.0;
  double b0 = -0.5;
  double b1 = 0.5;
  double delta_mu = 1.0;
  double delta_tau = 1.0;
  double sigma2 = 1.0;
};

/// One tsBCF Markov chain.
class Sampler {
 public:
  Sampler(ChainInputs inputs, ModelConfig config, RngStream rng);
  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  const SamplerState& state() const { return state_; }
  SamplerState& state() { return state_; }
  const Forest& mu_forest() const { return mu_forest_; }
  Forest& mu_forest() { return mu_forest_; }
  const Forest& tau_forest() const { return tau_forest_; }
  Forest& tau_forest() { return tau_forest_; }
  const ModelConfig& config() const { return config_; }
  const TreeData& mu_data() const { return mu_data_; }
  const TreeData& tau_data() const { return tau_data_; }
  const FactoredKernel& mu_kernel() const { return mu_kernel_; }
  const FactoredKernel& tau_kernel() const { return tau_kernel_; }
  const FactoredKernel& mu_unit_kernel() const { return mu_unit_; }
  const FactoredKernel& tau_unit_kernel() const { return tau_unit_; }
  RngStream& rng() { return rng_; }
  const MoveCounts& mu_moves() const { return mu_moves_; }
  const MoveCounts& tau_moves() const { return tau_moves_; }

  /// Coefficient b1 z_i + b0 (1 - z_i) of each unit's tau term.
  double tau_coef(std::size_t i) const;
  /// Current latent fit f_i at the observed treatment.
  std::vector<double> fit() const;
  /// Latent fits under z = 0 and z = 1 for every unit.
  std::pair<std::vector<double>, std::vector<double>> counterfactual_fits() const;

  /// Working data (y - alpha - b_z tau) / xi and its variance sigma2 / xi^2 for the mu forest.
  std::pair<std::vector<double>, std::vector<double>> mu_working_data() const;
  /// Working data (y - alpha - xi mu) / b_z and its variance sigma2 / b_z^2 for the tau forest.
  std::pair<std::vector<double>, std::vector<double>> tau_working_data() const;

  void update_latents();
  void sweep_mu_forest();
  void sweep_tau_forest();
  void gibbs_xi();
  void gibbs_b_treated();
  void gibbs_b_control();
  void gibbs_delta_mu();
  void gibbs_delta_tau();
  void gibbs_sigma2();

  /// One full scan in the fixed update order.
  void step();
  /// Burn-in, then n_draws retained draws every `thin` iterations.
  PosteriorDraws run();

  /// Throws SamplerError if any state component is non-finite.
  void check_finite(int iteration) const;

 private:
  void rebuild_mu_kernel();
  void rebuild_tau_kernel();
  void record(PosteriorDraws& out) const;

  ChainInputs inputs_;
  const Dataset& d_;
  ModelConfig config_;
  RngStream rng_;
  std::vector<std::size_t> mu_slot_, tau_slot_;
  CovariateIndex mu_index_, tau_index_;
  TreeData mu_data_, tau_data_;
  FactoredKernel mu_unit_, tau_unit_, mu_kernel_, tau_kernel_;
  TreePrior mu_prior_, tau_prior_;
  SamplerState state_;
  Forest mu_forest_, tau_forest_;
  double sigma_lambda_ = 1.0;
  MoveCounts mu_moves_, tau_moves_;
  std::vector<double> base_, coef_;
};

/// Final forests of one chain, serialized with write_forest.
struct ChainFinalState {
  std::string mu_trees;
  std::string tau_trees;
};

/// Runs `n_chains` chains with streams (seed, 0..n_chains-1) on up to `n_threads` threads
/// and concatenates their draws in chain order.
PosteriorDraws run_chains(const ChainInputs& inputs, const ModelConfig& config, int n_chains,
                          int n_threads, std::vector<ChainFinalState>* finals = nullptr);

}  // namespace tsbcf
