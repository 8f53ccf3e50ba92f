#include "tsbcf/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <gsl/gsl_multimin.h>

#include "tsbcf/stats.hpp"

namespace tsbcf {

double s_mu_from_elicitation(double lo, double hi, double divisor) {
  if (!(lo > 0.0 && hi < 1.0 && lo < hi)) {
    throw ValidationError("elicited risk range must satisfy 0 < lo < hi < 1");
  }
  if (!(divisor > 0.0)) throw ValidationError("spread divisor must be positive");
  return (normal_quantile(hi) - normal_quantile(lo)) / divisor;
}

LatentEffectSpread latent_effect_spread(const Dataset& h) {
  const std::size_t T = h.grid.size();
  std::vector<double> n0(T, 0.0), k0(T, 0.0), n1(T, 0.0), k1(T, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    auto& n = h.z[i] ? n1 : n0;
    auto& k = h.z[i] ? k1 : k0;
    n[h.t_idx[i]] += 1.0;
    k[h.t_idx[i]] += h.y[i];
  }
  LatentEffectSpread out;
  for (std::size_t t = 0; t < T; ++t) {
    if (n0[t] == 0.0 || n1[t] == 0.0) continue;
    const double p0 = (k0[t] + 0.5) / (n0[t] + 1.0);
    const double p1 = (k1[t] + 0.5) / (n1[t] + 1.0);
    out.effects.push_back(normal_quantile(p1) - normal_quantile(p0));
  }
  out.usable_points = out.effects.size();
  out.sd = std::sqrt(variance(out.effects));
  return out;
}

double s_tau_objective(double s, double target_sd) {
  return std::abs(std::numbers::sqrt2 * std::abs(s) - target_sd);
}

namespace {

double nm_objective(const gsl_vector* v, void* params) {
  return s_tau_objective(gsl_vector_get(v, 0), *static_cast<double*>(params));
}

}  // namespace

TauCalibration s_tau_calibrate(const Dataset& holdout, double s_mu) {
  TauCalibration out;
  const double start = 0.5 * s_mu;
  const LatentEffectSpread spread = latent_effect_spread(holdout);
  if (spread.usable_points < 2) {
    out.s_tau = start;
    out.fallback = true;
    out.warning = "holdout has fewer than two grid points with both arms; using s_tau = s_mu / 2";
    return out;
  }
  out.target_sd = spread.sd;
  double target = spread.sd;

  gsl_multimin_function f{&nm_objective, 1, &target};
  gsl_vector* x = gsl_vector_alloc(1);
  gsl_vector* step = gsl_vector_alloc(1);
  gsl_vector_set(x, 0, start);
  gsl_vector_set(step, 0, 0.25 * start);
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 1);
  gsl_multimin_fminimizer_set(m, &f, x, step);
  for (int it = 0; it < 500; ++it) {
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    out.trace.push_back(gsl_vector_get(m->x, 0));
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-8) == GSL_SUCCESS) break;
  }
  const double best = std::abs(gsl_vector_get(m->x, 0));
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(step);
  gsl_vector_free(x);

  out.s_tau = std::max(best, 0.01);
  out.objective = s_tau_objective(out.s_tau, target);
  return out;
}

HeterogeneityRatio structural_heterogeneity_ratio(const PosteriorDraws& d) {
  HeterogeneityRatio out;
  const std::size_t n = d.n_units();
  std::vector<double> het(n), hom(n);
  double sum = 0.0;
  for (std::size_t r = 0; r < d.n_draws(); ++r) {
    const auto f0 = d.f0.row(r);
    const auto f1 = d.f1.row(r);
    double dbar = 0.0, lo = f1[0] - f0[0], hi = lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = f1[i] - f0[i];
      dbar += e;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    dbar /= static_cast<double>(n);
    // Effects equal up to rounding: the substituted draw is the draw itself.
    const bool constant = hi - lo <= 1e-12 * std::max(1.0, std::abs(dbar));
    for (std::size_t i = 0; i < n; ++i) {
      het[i] = std::exp(log_normal_cdf(f1[i]) - log_normal_cdf(f0[i]));
      hom[i] = constant ? het[i] : std::exp(log_normal_cdf(f0[i] + dbar) - log_normal_cdf(f0[i]));
    }
    const double v_hom = variance(hom);
    if (!(v_hom > 0.0)) {
      ++out.excluded_draws;
      continue;
    }
    sum += variance(het) / v_hom;
    ++out.used_draws;
  }
  out.ratio = out.used_draws ? sum / static_cast<double>(out.used_draws) : 0.0;
  return out;
}

std::vector<HetGridRow> structural_heterogeneity_grid(const std::vector<double>& alphas,
                                                      const std::vector<double>& taus,
                                                      const std::vector<double>& mu_sds,
                                                      std::size_t n, RngStream& rng) {
  std::vector<HetGridRow> rows;
  rows.reserve(alphas.size() * taus.size() * mu_sds.size() * n);
  for (double a : alphas) {
    for (double t : taus) {
      for (double sd : mu_sds) {
        for (std::size_t i = 0; i < n; ++i) {
          const double mu = sd * rng.normal();
          rows.push_back({a, t, sd, std::exp(log_normal_cdf(a + mu + t) - log_normal_cdf(a + mu))});
        }
      }
    }
  }
  return rows;
}

std::vector<double> default_het_alphas() {
  return {normal_quantile(0.80), normal_quantile(0.90), normal_quantile(0.93),
          normal_quantile(0.95)};
}

std::vector<double> default_het_taus() { return {-0.5, -0.313, -0.1}; }

std::vector<double> default_het_sds() { return {0.1, 0.3, 0.6, 0.9}; }

}  // namespace tsbcf
