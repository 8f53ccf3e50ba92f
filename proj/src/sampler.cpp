#include "tsbcf/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include <gsl/gsl_cdf.h>

#include "tsbcf/stats.hpp"

namespace tsbcf {

void DrawMatrix::append_row(std::span<const double> row) {
  if (rows == 0 && values.empty()) cols = row.size();
  if (row.size() != cols) throw std::invalid_argument("draw row length mismatch");
  values.insert(values.end(), row.begin(), row.end());
  ++rows;
}

std::vector<double> DrawMatrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
  return out;
}

std::vector<double> DrawMatrix::column_means() const {
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += (*this)(r, c);
  }
  if (rows > 0) {
    for (double& v : out) v /= static_cast<double>(rows);
  }
  return out;
}

void MoveCounts::record(const MoveResult& move) {
  if (move.kind == MoveKind::kGrow) {
    ++grow_proposed;
    grow_accepted += move.accepted;
  } else if (move.kind == MoveKind::kPrune) {
    ++prune_proposed;
    prune_accepted += move.accepted;
  }
}

double MoveCounts::acceptance_rate() const {
  const std::size_t p = grow_proposed + prune_proposed;
  return p == 0 ? 0.0 : static_cast<double>(grow_accepted + prune_accepted) / static_cast<double>(p);
}

MoveCounts& MoveCounts::operator+=(const MoveCounts& o) {
  grow_proposed += o.grow_proposed;
  grow_accepted += o.grow_accepted;
  prune_proposed += o.prune_proposed;
  prune_accepted += o.prune_accepted;
  return *this;
}

void PosteriorDraws::append(const PosteriorDraws& o) {
  if (n_draws() == 0 && mu.values.empty()) {
    *this = o;
    return;
  }
  for (auto [dst, src] : {std::pair{&mu, &o.mu}, {&tau, &o.tau}, {&f0, &o.f0}, {&f1, &o.f1}}) {
    for (std::size_t r = 0; r < src->rows; ++r) dst->append_row(src->row(r));
  }
  auto cat = [](std::vector<double>& a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
  };
  cat(xi, o.xi);
  cat(b0, o.b0);
  cat(b1, o.b1);
  cat(delta_mu, o.delta_mu);
  cat(delta_tau, o.delta_tau);
  cat(sigma2, o.sigma2);
  chain.insert(chain.end(), o.chain.begin(), o.chain.end());
  mu_moves += o.mu_moves;
  tau_moves += o.tau_moves;
}

NormalPosterior xi_posterior(std::span<const double> mu, std::span<const double> e, double sigma2) {
  double smm = 0.0, sme = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    smm += mu[i] * mu[i];
    sme += mu[i] * e[i];
  }
  NormalPosterior p;
  p.var = 1.0 / (1.0 + smm / sigma2);
  p.mean = p.var * sme / sigma2;
  return p;
}

NormalPosterior b_posterior(std::span<const double> tau, std::span<const double> e, double sigma2,
                            double prior_mean, double prior_var) {
  double stt = 0.0, ste = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    stt += tau[i] * tau[i];
    ste += tau[i] * e[i];
  }
  NormalPosterior p;
  p.var = 1.0 / (1.0 / prior_var + stt / sigma2);
  p.mean = p.var * (prior_mean / prior_var + ste / sigma2);
  return p;
}

GammaParams delta_posterior(double nu, double ssq, std::size_t n_bots, std::size_t dim) {
  return {0.5 * (nu + static_cast<double>(n_bots * dim)), 0.5 * (nu + ssq)};
}

GammaParams sigma2_posterior(double nu, double lambda, double rss, std::size_t n) {
  return {0.5 * (nu + static_cast<double>(n)), 0.5 * (rss + nu * lambda)};
}

double sigma_prior_lambda(double sigma_hat, double nu, double q) {
  if (!(sigma_hat > 0.0) || !(nu > 0.0) || !(q > 0.0 && q < 1.0)) {
    throw ValidationError("invalid residual-variance prior settings");
  }
  return sigma_hat * sigma_hat * gsl_cdf_chisq_Pinv(1.0 - q, nu) / nu;
}

double ols_residual_sd(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const auto p = static_cast<Eigen::Index>(d.x.n_cols + 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = d.y[static_cast<std::size_t>(i)];
  if (n <= p) {
    const double sd = std::sqrt(variance(d.y));
    return sd > 0.0 ? sd : 1.0;
  }
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    X(i, 0) = 1.0;
    for (std::size_t c = 0; c < d.x.n_cols; ++c) X(i, static_cast<Eigen::Index>(c + 1)) = d.x(r, c);
    X(i, p - 1) = d.grid[d.t_idx[r]];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  const double rss = (y - X * beta).squaredNorm();
  const double sd = std::sqrt(rss / static_cast<double>(n - p));
  return sd > 0.0 ? sd : 1.0;
}

std::vector<double> estimate_offsets(const Dataset& d) {
  const std::size_t T = d.grid.size();
  std::vector<double> n_t(T, 0.0), k_t(T, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    n_t[d.t_idx[i]] += 1.0;
    k_t[d.t_idx[i]] += d.y[i];
  }
  const double n = static_cast<double>(d.size());
  const double k = std::accumulate(d.y.begin(), d.y.end(), 0.0);
  std::vector<double> alpha(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double nt = n_t[t] > 0 ? n_t[t] : n;
    const double kt = n_t[t] > 0 ? k_t[t] : k;
    if (!d.binary_outcome) {
      alpha[t] = kt / nt;
      continue;
    }
    const double rate = std::clamp(kt / nt, 1.0 / (nt + 2.0), (nt + 1.0) / (nt + 2.0));
    alpha[t] = normal_quantile(rate);
  }
  return alpha;
}

ChainInputs standard_inputs(const Dataset& d) {
  if (!d.pi_hat) throw ValidationError("propensity scores are required for the prognostic forest");
  ChainInputs in;
  in.data = &d;
  in.mu_x = d.x.with_column("pi_hat", *d.pi_hat);
  in.tau_x = d.x;
  return in;
}

namespace {

const Dataset& checked_data(const ChainInputs& in) {
  if (in.data == nullptr) throw ValidationError("chain inputs carry no dataset");
  const std::size_t n = in.data->size();
  if (in.mu_x.n_rows != n || in.tau_x.n_rows != n) {
    throw ValidationError("forest covariates do not match the dataset size");
  }
  return *in.data;
}

ModelConfig checked_config(ModelConfig c) {
  c.validate();
  return c;
}

std::vector<std::size_t> make_slots(const Dataset& d, bool constant) {
  if (constant) return std::vector<std::size_t>(d.size(), 0);
  return d.t_idx;
}

FactoredKernel unit_kernel(const Dataset& d, const ModelConfig& c, bool for_mu) {
  KernelSpec spec;
  const bool constant = for_mu ? c.constant_leaves_mu : c.constant_leaves_tau;
  spec.grid = constant ? std::vector<double>{0.0} : d.grid.values();
  const double s = for_mu ? c.s_mu : c.s_tau;
  spec.s2 = s * s;
  spec.n_trees = for_mu ? c.n_mu : (c.use_tau_forest ? c.n_tau : 1);
  spec.delta = 1.0;
  spec.kappa = for_mu ? c.kappa_mu : c.kappa_tau;
  spec.lengthscale = constant ? 1.0 : kappa_to_lengthscale(spec.kappa, d.grid);
  return build_kernel(spec, c.jitter);
}

}  // namespace

Sampler::Sampler(ChainInputs inputs, ModelConfig config, RngStream rng)
    : inputs_(std::move(inputs)),
      d_(checked_data(inputs_)),
      config_(checked_config(std::move(config))),
      rng_(rng),
      mu_slot_(make_slots(d_, config_.constant_leaves_mu)),
      tau_slot_(make_slots(d_, config_.constant_leaves_tau)),
      mu_index_(inputs_.mu_x),
      tau_index_(inputs_.tau_x),
      mu_data_{&inputs_.mu_x, mu_slot_, &mu_index_},
      tau_data_{&inputs_.tau_x, tau_slot_, &tau_index_},
      mu_unit_(unit_kernel(d_, config_, true)),
      tau_unit_(unit_kernel(d_, config_, false)),
      mu_kernel_(mu_unit_),
      tau_kernel_(tau_unit_),
      mu_prior_{config_.eta_mu, config_.beta_mu},
      tau_prior_{config_.eta_tau, config_.beta_tau},
      mu_forest_(static_cast<std::size_t>(config_.n_mu), static_cast<std::size_t>(mu_unit_.dim()),
                 mu_data_),
      tau_forest_(config_.use_tau_forest ? static_cast<std::size_t>(config_.n_tau) : 1,
                  static_cast<std::size_t>(tau_unit_.dim()), tau_data_),
      base_(d_.size()),
      coef_(d_.size()) {
  if (inputs_.z_column && *inputs_.z_column >= inputs_.mu_x.n_cols) {
    throw ValidationError("treatment column index outside the prognostic covariates");
  }
  if (config_.fixed_offsets) {
    if (config_.fixed_offsets->size() != d_.grid.size()) {
      throw ValidationError("fixed offsets must have one value per grid point");
    }
    state_.alpha = *config_.fixed_offsets;
  } else {
    state_.alpha = estimate_offsets(d_);
  }
  if (!config_.use_tau_forest) {
    state_.b1 = 1.0;
    state_.b0 = 0.0;
  }
  if (config_.response_mode == ResponseMode::kContinuous) {
    const double sd = ols_residual_sd(d_);
    sigma_lambda_ = sigma_prior_lambda(sd, config_.sigma_nu, config_.sigma_q);
    state_.sigma2 = sd * sd;
    state_.latent = d_.y;
  } else {
    state_.latent.assign(d_.size(), 0.0);
    update_latents();
  }
}

double Sampler::tau_coef(std::size_t i) const {
  return d_.z[i] == 1 ? state_.b1 : state_.b0;
}

std::vector<double> Sampler::fit() const {
  std::vector<double> f(d_.size());
  const auto mu = mu_forest_.fit();
  const auto tau = tau_forest_.fit();
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = state_.alpha[d_.t_idx[i]] + state_.xi * mu[i] + tau_coef(i) * tau[i];
  }
  return f;
}

std::pair<std::vector<double>, std::vector<double>> Sampler::counterfactual_fits() const {
  const std::size_t n = d_.size();
  std::vector<double> f0(n), f1(n);
  const auto mu = mu_forest_.fit();
  const auto tau = tau_forest_.fit();
  if (inputs_.z_column) {
    const std::size_t zc = *inputs_.z_column;
    const Covariates& x = inputs_.mu_x;
    std::vector<double> row(x.n_cols);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(x.row(i), x.row(i) + x.n_cols, row.begin());
      row[zc] = 1.0 - row[zc];
      double other = 0.0;
      for (std::size_t j = 0; j < mu_forest_.n_trees(); ++j) {
        other += mu_forest_.tree(j).tree().evaluate(row.data(), mu_slot_[i]);
      }
      const double a = state_.alpha[d_.t_idx[i]];
      const double own = a + state_.xi * mu[i];
      const double flipped = a + state_.xi * other;
      f0[i] = d_.z[i] == 0 ? own : flipped;
      f1[i] = d_.z[i] == 1 ? own : flipped;
    }
    return {f0, f1};
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double base = state_.alpha[d_.t_idx[i]] + state_.xi * mu[i];
    f0[i] = base + state_.b0 * tau[i];
    f1[i] = base + state_.b1 * tau[i];
  }
  return {f0, f1};
}

std::pair<std::vector<double>, std::vector<double>> Sampler::mu_working_data() const {
  const std::size_t n = d_.size();
  std::vector<double> data(n), var(n);
  const auto tau = tau_forest_.fit();
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = (state_.latent[i] - state_.alpha[d_.t_idx[i]] - tau_coef(i) * tau[i]) / state_.xi;
    var[i] = state_.sigma2 / (state_.xi * state_.xi);
  }
  return {data, var};
}

std::pair<std::vector<double>, std::vector<double>> Sampler::tau_working_data() const {
  const std::size_t n = d_.size();
  std::vector<double> data(n), var(n);
  const auto mu = mu_forest_.fit();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = tau_coef(i);
    data[i] = (state_.latent[i] - state_.alpha[d_.t_idx[i]] - state_.xi * mu[i]) / c;
    var[i] = state_.sigma2 / (c * c);
  }
  return {data, var};
}

void Sampler::update_latents() {
  if (config_.response_mode == ResponseMode::kContinuous) return;
  const auto f = fit();
  for (std::size_t i = 0; i < f.size(); ++i) {
    state_.latent[i] = sample_truncated_normal(
        rng_, f[i], 1.0, d_.y[i] == 1.0 ? Truncation::kAboveZero : Truncation::kBelowZero);
  }
}

void Sampler::sweep_mu_forest() {
  const auto tau = tau_forest_.fit();
  for (std::size_t i = 0; i < d_.size(); ++i) {
    base_[i] = state_.latent[i] - state_.alpha[d_.t_idx[i]] - tau_coef(i) * tau[i];
    coef_[i] = state_.xi;
  }
  for (std::size_t j = 0; j < mu_forest_.n_trees(); ++j) {
    mu_moves_.record(mu_forest_.update_tree(j, mu_data_, base_, coef_, state_.sigma2, mu_kernel_,
                                            mu_prior_, rng_));
  }
}

void Sampler::sweep_tau_forest() {
  if (!config_.use_tau_forest) return;
  const auto mu = mu_forest_.fit();
  for (std::size_t i = 0; i < d_.size(); ++i) {
    base_[i] = state_.latent[i] - state_.alpha[d_.t_idx[i]] - state_.xi * mu[i];
    coef_[i] = tau_coef(i);
  }
  for (std::size_t j = 0; j < tau_forest_.n_trees(); ++j) {
    tau_moves_.record(tau_forest_.update_tree(j, tau_data_, base_, coef_, state_.sigma2,
                                              tau_kernel_, tau_prior_, rng_));
  }
}

void Sampler::gibbs_xi() {
  if (!config_.update_xi) return;
  const auto tau = tau_forest_.fit();
  for (std::size_t i = 0; i < d_.size(); ++i) {
    base_[i] = state_.latent[i] - state_.alpha[d_.t_idx[i]] - tau_coef(i) * tau[i];
  }
  const NormalPosterior p = xi_posterior(mu_forest_.fit(), base_, state_.sigma2);
  state_.xi = p.mean + std::sqrt(p.var) * rng_.normal();
}

namespace {

// Residuals y - alpha - xi mu and tau values restricted to one arm.
void arm_regression(const Dataset& d, const SamplerState& s, std::span<const double> mu,
                    std::span<const double> tau, int arm, std::vector<double>& x,
                    std::vector<double>& e) {
  x.clear();
  e.clear();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.z[i] != arm) continue;
    x.push_back(tau[i]);
    e.push_back(s.latent[i] - s.alpha[d.t_idx[i]] - s.xi * mu[i]);
  }
}

}  // namespace

void Sampler::gibbs_b_treated() {
  if (!config_.use_tau_forest || !config_.update_b) return;
  std::vector<double> x, e;
  arm_regression(d_, state_, mu_forest_.fit(), tau_forest_.fit(), 1, x, e);
  const NormalPosterior p = b_posterior(x, e, state_.sigma2, 0.5, 0.5);
  state_.b1 = p.mean + std::sqrt(p.var) * rng_.normal();
}

void Sampler::gibbs_b_control() {
  if (!config_.use_tau_forest || !config_.update_b) return;
  std::vector<double> x, e;
  arm_regression(d_, state_, mu_forest_.fit(), tau_forest_.fit(), 0, x, e);
  const NormalPosterior p = b_posterior(x, e, state_.sigma2, -0.5, 0.5);
  state_.b0 = p.mean + std::sqrt(p.var) * rng_.normal();
}

void Sampler::rebuild_mu_kernel() { mu_kernel_ = rescale_kernel(mu_unit_, state_.delta_mu); }
void Sampler::rebuild_tau_kernel() { tau_kernel_ = rescale_kernel(tau_unit_, state_.delta_tau); }

void Sampler::gibbs_delta_mu() {
  if (!config_.update_delta_mu) return;
  const auto [ssq, n_bots] = mu_forest_.leaf_quadratic_form(mu_unit_.precision);
  const GammaParams g = delta_posterior(config_.nu_mu, ssq, n_bots,
                                        static_cast<std::size_t>(mu_unit_.dim()));
  state_.delta_mu = rng_.gamma(g.shape, g.rate);
  rebuild_mu_kernel();
}

void Sampler::gibbs_delta_tau() {
  if (!config_.use_tau_forest || config_.tau_scale_mode != TauScaleMode::kHalfCauchy) return;
  const auto [ssq, n_bots] = tau_forest_.leaf_quadratic_form(tau_unit_.precision);
  const GammaParams g = delta_posterior(config_.nu_tau, ssq, n_bots,
                                        static_cast<std::size_t>(tau_unit_.dim()));
  state_.delta_tau = rng_.gamma(g.shape, g.rate);
  rebuild_tau_kernel();
}

void Sampler::gibbs_sigma2() {
  if (config_.response_mode != ResponseMode::kContinuous) {
    throw std::logic_error("sigma2 is fixed at 1 in probit mode");
  }
  const auto f = fit();
  double rss = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) rss += (d_.y[i] - f[i]) * (d_.y[i] - f[i]);
  const GammaParams g = sigma2_posterior(config_.sigma_nu, sigma_lambda_, rss, f.size());
  state_.sigma2 = sample_inverse_gamma(rng_, g.shape, g.rate);
}

void Sampler::step() {
  update_latents();
  sweep_mu_forest();
  gibbs_xi();
  gibbs_delta_mu();
  sweep_tau_forest();
  gibbs_b_treated();
  gibbs_b_control();
  gibbs_delta_tau();
  if (config_.response_mode == ResponseMode::kContinuous) gibbs_sigma2();
}

void Sampler::check_finite(int iteration) const {
  auto bad = [](double v) { return !std::isfinite(v); };
  const SamplerState& s = state_;
  std::string what;
  if (bad(s.xi) || bad(s.b0) || bad(s.b1) || bad(s.delta_mu) || bad(s.delta_tau) || bad(s.sigma2)) {
    what = "scalar parameter";
  } else if (std::any_of(s.latent.begin(), s.latent.end(), bad)) {
    what = "latent outcome";
  } else if (std::any_of(mu_forest_.fit().begin(), mu_forest_.fit().end(), bad)) {
    what = "prognostic forest fit";
  } else if (std::any_of(tau_forest_.fit().begin(), tau_forest_.fit().end(), bad)) {
    what = "treatment forest fit";
  }
  if (!what.empty()) {
    throw SamplerError("non-finite " + what + " at iteration " + std::to_string(iteration),
                       iteration);
  }
}

void Sampler::record(PosteriorDraws& out) const {
  auto [f0, f1] = counterfactual_fits();
  if (inputs_.z_column) {
    std::vector<double> mu0(d_.size()), tau(d_.size());
    for (std::size_t i = 0; i < d_.size(); ++i) {
      const double a = state_.alpha[d_.t_idx[i]];
      mu0[i] = (f0[i] - a) / state_.xi;
      tau[i] = f1[i] - f0[i];
    }
    out.mu.append_row(mu0);
    out.tau.append_row(tau);
    out.b1.push_back(1.0);
    out.b0.push_back(0.0);
  } else {
    out.mu.append_row(mu_forest_.fit());
    out.tau.append_row(tau_forest_.fit());
    out.b1.push_back(state_.b1);
    out.b0.push_back(state_.b0);
  }
  out.f0.append_row(f0);
  out.f1.append_row(f1);
  out.xi.push_back(state_.xi);
  out.delta_mu.push_back(state_.delta_mu);
  out.delta_tau.push_back(state_.delta_tau);
  out.sigma2.push_back(state_.sigma2);
  out.chain.push_back(static_cast<int>(rng_.stream_id()));
}

PosteriorDraws Sampler::run() {
  PosteriorDraws out;
  out.alpha = state_.alpha;
  out.t_idx = d_.t_idx;
  out.seed = config_.seed;
  const int total = config_.n_burn + config_.n_draws * config_.thin;
  for (int it = 0; it < total; ++it) {
    step();
    check_finite(it);
    const int kept = it - config_.n_burn;
    if (kept >= 0 && kept % config_.thin == 0) record(out);
  }
  out.mu_moves = mu_moves_;
  out.tau_moves = tau_moves_;
  return out;
}

PosteriorDraws run_chains(const ChainInputs& inputs, const ModelConfig& config, int n_chains,
                          int n_threads, std::vector<ChainFinalState>* finals) {
  if (n_chains < 1) throw ValidationError("need at least one chain");
  std::vector<PosteriorDraws> results(static_cast<std::size_t>(n_chains));
  if (finals) finals->assign(static_cast<std::size_t>(n_chains), {});
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  auto run_one = [&](int c) {
    try {
      Sampler s(inputs, config, RngStream(config.seed, static_cast<std::uint64_t>(c)));
      results[static_cast<std::size_t>(c)] = s.run();
      if (finals) {
        std::ostringstream mu, tau;
        write_forest(mu, s.mu_forest());
        write_forest(tau, s.tau_forest());
        (*finals)[static_cast<std::size_t>(c)] = {mu.str(), tau.str()};
      }
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  const int workers = std::max(1, std::min(n_threads, n_chains));
  if (workers == 1) {
    for (int c = 0; c < n_chains; ++c) run_one(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int c = next++; c < n_chains; c = next++) run_one(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  PosteriorDraws merged;
  for (auto& r : results) merged.append(r);
  return merged;
}

}  // namespace tsbcf
