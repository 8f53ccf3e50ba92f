#include "tsbcf/simbench.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include "tsbcf/stats.hpp"

namespace tsbcf {

std::string to_string(Scenario s) {
  static const char* names[] = {"A", "B", "C", "D", "E"};
  return names[static_cast<int>(s)];
}

std::string to_string(ModelMode m) {
  switch (m) {
    case ModelMode::kTsBcf1: return "tsBCF1";
    case ModelMode::kTsBcf2: return "tsBCF2";
    case ModelMode::kBcf: return "BCF-mode";
    case ModelMode::kBart: return "BART-mode";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  for (Scenario c : all_scenarios()) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown scenario '" + s + "'");
}

ModelMode parse_model_mode(const std::string& s) {
  for (ModelMode m : all_model_modes()) {
    if (to_string(m) == s) return m;
  }
  if (s == "BCF") return ModelMode::kBcf;
  if (s == "BART") return ModelMode::kBart;
  throw ValidationError("unknown model '" + s + "'");
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::kA, Scenario::kB, Scenario::kC, Scenario::kD, Scenario::kE};
}

std::vector<ModelMode> all_model_modes() {
  return {ModelMode::kTsBcf1, ModelMode::kTsBcf2, ModelMode::kBcf, ModelMode::kBart};
}

double mu_true(double t, double x1, double x2) {
  return 0.25 * std::pow(t, 1.5) + x1 / 6.0 + x2 / 4.0;
}

double tau_true(Scenario s, double t, double x3) {
  const double smooth = 0.2 * t - 0.05 * std::sin(1.5 * std::numbers::pi * t);
  const double lo = x3 > -0.5 ? 1.0 : 0.0;
  const double hi = x3 > 0.5 ? 1.0 : 0.0;
  switch (s) {
    case Scenario::kA: return 0.1 + smooth;
    case Scenario::kB: return 0.1 + 0.2 * lo + 0.15 * hi + smooth;
    case Scenario::kC: return 0.1 + 0.2 * lo + (0.15 + 0.2 * t) * hi + smooth;
    case Scenario::kD: return 0.05 + 0.05 * lo + (0.15 + 0.2 * t) * hi + smooth;
    case Scenario::kE: return 0.1;
  }
  throw ValidationError("unknown scenario");
}

double propensity_true(double x1, double x2, double x4, double rho) {
  const double s = x4 > 0.0 ? -1.0 : 1.0;
  return normal_cdf(rho * (x1 / 6.0 - x2 / 4.0) + (1.0 - rho) * s);
}

SimDataset gen_dataset(const ScenarioSpec& spec, RngStream& rng) {
  if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) throw ValidationError("rho must lie in [0, 1]");
  if (spec.n < 1) throw ValidationError("n must be at least 1");
  const std::size_t n = spec.n;
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(k / 10.0);

  SimDataset out;
  Dataset& d = out.data;
  d.grid = TargetGrid(grid);
  d.x.n_rows = n;
  d.x.n_cols = 5;
  d.x.values.resize(n * 5);
  d.x.names = {"x1", "x2", "x3", "x4", "x5"};
  d.x.kinds.assign(5, ColumnKind::kContinuous);
  d.x.levels.assign(5, {});
  d.y.resize(n);
  d.z.resize(n);
  d.t_idx.resize(n);
  SimTruth& tr = out.truth;
  tr.mu.resize(n);
  tr.tau.resize(n);
  tr.pi.resize(n);
  tr.rr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = d.x.values.data() + i * 5;
    for (int j = 0; j < 5; ++j) row[j] = rng.normal();
    d.t_idx[i] = rng.index(10);
    const double t = grid[d.t_idx[i]];
    tr.mu[i] = mu_true(t, row[0], row[1]);
    tr.tau[i] = tau_true(spec.id, t, row[2]);
    tr.pi[i] = propensity_true(row[0], row[1], row[3], spec.rho);
    d.z[i] = rng.bernoulli(tr.pi[i]) ? 1 : 0;
    d.y[i] = rng.bernoulli(normal_cdf(tr.mu[i] + tr.tau[i] * d.z[i])) ? 1.0 : 0.0;
    tr.rr[i] = relative_risk(tr.mu[i], tr.mu[i] + tr.tau[i]);
    if (!(tr.rr[i] > 1.0) || !std::isfinite(tr.rr[i])) {
      throw std::logic_error("simulated truth RR must exceed 1");
    }
  }
  d.validate();
  return out;
}

ModelConfig model_mode_config(ModelMode mode, const ModelConfig& base) {
  ModelConfig c = base;
  switch (mode) {
    case ModelMode::kTsBcf1:
      c.kappa_mu = 1.0;
      c.kappa_tau = 1.0;
      break;
    case ModelMode::kTsBcf2:
      c.kappa_mu = 1.0;
      c.kappa_tau = 3.0;
      break;
    case ModelMode::kBcf:
      c.constant_leaves_mu = true;
      c.constant_leaves_tau = true;
      break;
    case ModelMode::kBart:
      c.use_tau_forest = false;
      c.update_b = false;
      c.constant_leaves_mu = true;
      c.update_xi = false;
      c.update_delta_mu = false;
      c.s_mu = 1.5;
      break;
  }
  return c;
}

ChainInputs model_mode_inputs(ModelMode mode, const Dataset& d) {
  if (!d.pi_hat) throw ValidationError("comparator inputs need pi_hat");
  ChainInputs in = standard_inputs(d);
  if (mode == ModelMode::kBcf) {
    const auto t = d.target_values();
    in.mu_x = in.mu_x.with_column("t", t);
    in.tau_x = in.tau_x.with_column("t", t);
  } else if (mode == ModelMode::kBart) {
    std::vector<double> z(d.z.begin(), d.z.end());
    in.mu_x = in.mu_x.with_column("t", d.target_values());
    in.z_column = in.mu_x.n_cols;
    in.mu_x = in.mu_x.with_column("z", z);
  }
  return in;
}

ReplicateMetrics score_rr(const RRDraws& rr, const std::vector<double>& truth_rr) {
  if (truth_rr.size() != rr.n_units()) throw std::invalid_argument("truth length mismatch");
  ReplicateMetrics m;
  double se = 0.0;
  const std::size_t n = rr.n_units();
  for (std::size_t i = 0; i < n; ++i) {
    const IntervalSummary s = summarize_draws(rr.rr.column(i));
    se += (s.mean - truth_rr[i]) * (s.mean - truth_rr[i]);
    if (s.lo <= truth_rr[i] && truth_rr[i] <= s.hi) m.coverage += 1.0;
    m.length += s.hi - s.lo;
  }
  m.rmse = std::sqrt(se / static_cast<double>(n));
  m.coverage /= static_cast<double>(n);
  m.length /= static_cast<double>(n);
  return m;
}

void BenchmarkConfig::validate() const {
  if (scenarios.empty()) throw ValidationError("benchmark needs at least one scenario");
  if (models.empty()) throw ValidationError("benchmark needs at least one model");
  if (n < 2) throw ValidationError("benchmark n must be at least 2");
  if (replicates < 1) throw ValidationError("benchmark needs at least one replicate");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("rho must lie in [0, 1]");
  if (threads < 1) throw ValidationError("threads must be at least 1");
  if (propensity.n_draws < 1) throw ValidationError("propensity needs at least one draw");
  sampler.validate();
}

ModelConfig default_benchmark_sampler() {
  ModelConfig c;
  c.n_burn = 500;
  c.n_draws = 500;
  c.s_mu = 1.0;
  c.s_tau = 0.5;
  return c;
}

namespace {

// Stream ids: 1 data, 2 propensity, 3.. models, keyed by (scenario, replicate).
std::uint64_t stream_key(Scenario s, int replicate, int slot) {
  return (static_cast<std::uint64_t>(s) + 1) * 100'000'000ULL +
         static_cast<std::uint64_t>(replicate) * 100ULL + static_cast<std::uint64_t>(slot);
}

void run_job(const BenchmarkConfig& cfg, Scenario scn, int rep,
             std::vector<ReplicateRecord>& records) {
  auto fail_all = [&](const std::string& msg) {
    for (auto& r : records) {
      r.ok = false;
      r.error = msg;
    }
  };
  SimDataset sim;
  Dataset d;
  try {
    RngStream data_rng(cfg.seed, stream_key(scn, rep, 1));
    sim = gen_dataset({scn, cfg.rho, cfg.n}, data_rng);
    PropensityOptions po = cfg.propensity;
    po.seed = cfg.seed;
    po.stream = stream_key(scn, rep, 2);
    d = attach_propensity(sim.data, fit_propensity(sim.data, po).pi_hat);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return;
  }
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    ReplicateRecord& rec = records[m];
    try {
      const ModelMode mode = cfg.models[m];
      ModelConfig mc = model_mode_config(mode, cfg.sampler);
      mc.seed = cfg.seed;
      Sampler s(model_mode_inputs(mode, d), mc,
                RngStream(cfg.seed, stream_key(scn, rep, 3 + static_cast<int>(mode))));
      const RRDraws rr = rr_draws(s.run());
      rec.metrics = score_rr(rr, sim.truth.rr);
      for (const auto& ts : rr_by_target(rr, d.t_idx, d.grid)) rec.rr_curve.push_back(ts.summary.mean);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  }
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  struct Job {
    Scenario scn;
    int rep;
  };
  std::vector<Job> jobs;
  for (Scenario s : config.scenarios) {
    for (int r = 0; r < config.replicates; ++r) jobs.push_back({s, r});
  }
  const std::size_t M = config.models.size();
  std::vector<std::vector<ReplicateRecord>> per_job(jobs.size(), std::vector<ReplicateRecord>(M));
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      per_job[j][m].scenario = jobs[j].scn;
      per_job[j][m].model = config.models[m];
      per_job[j][m].replicate = jobs[j].rep;
    }
  }
  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(config, jobs[j].scn, jobs[j].rep, per_job[j]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          run_job(config, jobs[j].scn, jobs[j].rep, per_job[j]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  BenchmarkResult out;
  for (Scenario s : config.scenarios) {
    for (std::size_t m = 0; m < M; ++m) {
      MetricsRow row;
      row.scenario = s;
      row.model = config.models[m];
      std::vector<double> rmse;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].scn != s) continue;
        const ReplicateRecord& rec = per_job[j][m];
        if (!rec.ok) {
          ++row.n_failed;
          continue;
        }
        ++row.n_ok;
        rmse.push_back(rec.metrics.rmse);
        row.coverage += rec.metrics.coverage;
        row.length += rec.metrics.length;
      }
      if (row.n_ok > 0) {
        row.rmse_mean = mean(rmse);
        row.rmse_sd = rmse.size() > 1 ? std::sqrt(variance(rmse)) : 0.0;
        row.coverage /= row.n_ok;
        row.length /= row.n_ok;
      } else {
        row.rmse_mean = row.rmse_sd = row.coverage = row.length = NAN;
      }
      out.rows.push_back(row);
    }
  }
  for (const auto& job : per_job) {
    for (const auto& rec : job) out.replicates.push_back(rec);
  }
  return out;
}

}  // namespace tsbcf
