#include "tsbcf/propensity.hpp"

#include <algorithm>

#include "tsbcf/sampler.hpp"
#include "tsbcf/stats.hpp"

namespace tsbcf {

PropensityFit fit_propensity(const Dataset& d, const PropensityOptions& opt) {
  const std::size_t n_treated = d.n_treated();
  if (n_treated == 0 || n_treated == d.size()) {
    throw ValidationError("no overlap: propensity model needs both treated and control units");
  }
  // Treatment becomes the outcome of a single-forest probit model on a one-point grid.
  Dataset pd;
  pd.y.assign(d.z.begin(), d.z.end());
  pd.z.assign(d.size(), 0);
  pd.t_idx.assign(d.size(), 0);
  pd.grid = TargetGrid({0.0});
  pd.x = opt.include_target ? d.x.with_column("t", d.target_values()) : d.x;

  ChainInputs in;
  in.data = &pd;
  in.mu_x = pd.x;
  in.tau_x = pd.x;

  ModelConfig c;
  c.n_mu = opt.n_trees;
  c.eta_mu = opt.eta;
  c.beta_mu = opt.beta;
  c.s_mu = opt.s;
  c.n_tau = 1;
  c.use_tau_forest = false;
  c.constant_leaves_mu = true;
  c.constant_leaves_tau = true;
  c.update_xi = false;
  c.update_delta_mu = false;
  c.n_burn = opt.n_burn;
  c.n_draws = opt.n_draws;
  c.seed = opt.seed;

  Sampler s(in, c, RngStream(opt.seed, opt.stream));
  const PosteriorDraws draws = s.run();

  PropensityFit fit;
  fit.n_draws = static_cast<int>(draws.n_draws());
  fit.clip_lo = opt.clip_lo;
  fit.clip_hi = opt.clip_hi;
  fit.pi_hat.assign(d.size(), 0.0);
  for (std::size_t r = 0; r < draws.n_draws(); ++r) {
    const auto f = draws.f0.row(r);
    for (std::size_t i = 0; i < d.size(); ++i) fit.pi_hat[i] += normal_cdf(f[i]);
  }
  for (double& p : fit.pi_hat) {
    p = std::clamp(p / static_cast<double>(draws.n_draws()), opt.clip_lo, opt.clip_hi);
  }
  return fit;
}

Dataset attach_propensity(const Dataset& d, const std::vector<double>& pi_hat) {
  if (pi_hat.size() != d.size()) throw ValidationError("propensity length mismatch");
  Dataset out = d;
  out.pi_hat = pi_hat;
  out.validate();
  return out;
}

}  // namespace tsbcf
