#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tsbcf/data.hpp"
#include "tsbcf/random.hpp"
#include "tsbcf/sampler.hpp"

namespace tsbcf {

/// (Phi^-1(hi) - Phi^-1(lo)) / divisor.
double s_mu_from_elicitation(double lo, double hi, double divisor = 3.3);

/// Empirical spread of the latent treatment effect across grid points:
/// SD over usable grid points of Phi^-1(p1_t) - Phi^-1(p0_t), with arm rates smoothed
/// as (k + 0.5) / (n + 1). A grid point is usable when both arms are observed there.
struct LatentEffectSpread {
  double sd = 0.0;
  std::size_t usable_points = 0;
  std::vector<double> effects;
};
LatentEffectSpread latent_effect_spread(const Dataset& holdout);

/// Matching objective |sqrt(2) * s - target_sd|. sqrt(2) s is the prior SD of
/// (b1 - b0) * tau when tau has marginal variance s^2 and E[(b1 - b0)^2] = 2.
double s_tau_objective(double s, double target_sd);

struct TauCalibration {
  double s_tau = 0.0;
  double target_sd = 0.0;
  double objective = 0.0;
  bool fallback = false;
  std::string warning;
  std::vector<double> trace;  // simplex best point per iteration
};

/// Nelder-Mead on s_tau_objective started at s_mu / 2; result floored at 0.01.
/// Falls back to s_mu / 2 when fewer than two grid points have both arms.
TauCalibration s_tau_calibrate(const Dataset& holdout, double s_mu);

struct HeterogeneityRatio {
  double ratio = 0.0;
  std::size_t used_draws = 0;
  std::size_t excluded_draws = 0;
};

/// Mean over draws of Var_i(RR_i) / Var_i(RR_i with the latent effect replaced by its
/// cross-unit mean). Draws whose homogeneous variance is zero are excluded.
HeterogeneityRatio structural_heterogeneity_ratio(const PosteriorDraws& draws);

struct HetGridRow {
  double alpha = 0.0;
  double tau = 0.0;
  double mu_sd = 0.0;
  double rr = 0.0;
};

/// For every (alpha, tau, sd): n draws mu_i ~ N(0, sd^2) and RR_i = Phi(alpha+mu_i+tau)/Phi(alpha+mu_i).
std::vector<HetGridRow> structural_heterogeneity_grid(const std::vector<double>& alphas,
                                                      const std::vector<double>& taus,
                                                      const std::vector<double>& mu_sds,
                                                      std::size_t n, RngStream& rng);

std::vector<double> default_het_alphas();
std::vector<double> default_het_taus();
std::vector<double> default_het_sds();

}  // namespace tsbcf
