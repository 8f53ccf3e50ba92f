#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsbcf/calibration.hpp"
#include "tsbcf/config.hpp"
#include "tsbcf/data.hpp"
#include "tsbcf/draws_io.hpp"
#include "tsbcf/estimands.hpp"
#include "tsbcf/kernel.hpp"
#include "tsbcf/propensity.hpp"
#include "tsbcf/sampler.hpp"
#include "tsbcf/simbench.hpp"

namespace tsbcf::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::uint64_t seed = 1;
  int chains = 1;
  int threads = 1;
};

struct SchemaOptions {
  std::string data;
  DatasetSchema schema;
  std::string delimiter = ",";

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--data", data, "Input dataset (delimited text with header)");
    if (required) opt->required();
    app->add_option("--outcome", schema.outcome, "Outcome column")->capture_default_str();
    app->add_option("--treatment", schema.treatment, "Treatment column")->capture_default_str();
    app->add_option("--target", schema.target, "Target covariate column")->capture_default_str();
    app->add_option("--covariates", schema.covariates, "Covariate columns (default: all others)")
        ->delimiter(',');
    app->add_option("--categorical", schema.categorical, "Categorical covariate columns")
        ->delimiter(',');
    app->add_option("--propensity-column", schema.propensity, "Column holding supplied pi_hat");
    app->add_option("--grid", schema.grid, "Declared target grid (default: observed values)")
        ->delimiter(',');
    app->add_flag("--continuous", schema.continuous_outcome, "Continuous outcome");
    app->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();
  }

  Dataset load() {
    if (delimiter.size() != 1) throw ValidationError("delimiter must be a single character");
    schema.delimiter = delimiter[0];
    if (!fs::exists(data)) throw ValidationError("dataset not found: " + data);
    return load_dataset(data, schema);
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
  app->add_option("--chains", c.chains, "Number of chains")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

void add_model(CLI::App* app, ModelConfig& m, std::string& tau_scale) {
  app->add_option("--n-mu", m.n_mu, "Prognostic trees")->capture_default_str();
  app->add_option("--n-tau", m.n_tau, "Treatment trees")->capture_default_str();
  app->add_option("--eta-mu", m.eta_mu)->capture_default_str();
  app->add_option("--beta-mu", m.beta_mu)->capture_default_str();
  app->add_option("--eta-tau", m.eta_tau)->capture_default_str();
  app->add_option("--beta-tau", m.beta_tau)->capture_default_str();
  app->add_option("--kappa-mu", m.kappa_mu, "Prognostic smoothness")->capture_default_str();
  app->add_option("--kappa-tau", m.kappa_tau, "Treatment smoothness")->capture_default_str();
  app->add_option("--nu-mu", m.nu_mu)->capture_default_str();
  app->add_option("--nu-tau", m.nu_tau)->capture_default_str();
  app->add_option("--tau-scale", tau_scale, "half-normal | half-cauchy")->capture_default_str();
  app->add_option("--sigma-nu", m.sigma_nu)->capture_default_str();
  app->add_option("--sigma-q", m.sigma_q)->capture_default_str();
  app->add_option("--burn", m.n_burn, "Burn-in iterations")->capture_default_str();
  app->add_option("--draws", m.n_draws, "Retained draws")->capture_default_str();
  app->add_option("--thin", m.thin)->capture_default_str();
}

json config_json(const ModelConfig& m) {
  return json{{"n_mu", m.n_mu},
              {"n_tau", m.n_tau},
              {"eta_mu", m.eta_mu},
              {"beta_mu", m.beta_mu},
              {"eta_tau", m.eta_tau},
              {"beta_tau", m.beta_tau},
              {"kappa_mu", m.kappa_mu},
              {"kappa_tau", m.kappa_tau},
              {"s_mu", m.s_mu},
              {"s_tau", m.s_tau},
              {"nu_mu", m.nu_mu},
              {"nu_tau", m.nu_tau},
              {"tau_scale_mode", to_string(m.tau_scale_mode)},
              {"response_mode", to_string(m.response_mode)},
              {"sigma_nu", m.sigma_nu},
              {"sigma_q", m.sigma_q},
              {"n_burn", m.n_burn},
              {"n_draws", m.n_draws},
              {"thin", m.thin},
              {"seed", m.seed}};
}

json moves_json(const MoveCounts& c) {
  return json{{"grow_proposed", c.grow_proposed},
              {"grow_accepted", c.grow_accepted},
              {"prune_proposed", c.prune_proposed},
              {"prune_accepted", c.prune_accepted},
              {"acceptance_rate", c.acceptance_rate()}};
}

class Manifest {
 public:
  Manifest(std::string command, fs::path dir) : dir_(std::move(dir)), start_(clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["files"] = json::array();
  }
  json& operator[](const char* key) { return j_[key]; }
  void file(const std::string& name) { j_["files"].push_back(name); }
  void write() {
    j_["wall_time_seconds"] = std::chrono::duration<double>(clock::now() - start_).count();
    std::ofstream out(dir_ / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir_.string());
    out << j_.dump(2) << '\n';
  }

 private:
  using clock = std::chrono::steady_clock;
  fs::path dir_;
  clock::time_point start_;
  json j_;
};

std::vector<std::string> summary_row(const IntervalSummary& s) {
  return {format_double(s.mean), format_double(s.lo), format_double(s.hi)};
}

std::vector<double> read_propensity_file(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("propensity file not found: " + path.string());
  const CsvTable t = read_csv(path);
  const std::size_t c = t.column("pi_hat");
  std::vector<double> v;
  for (const auto& row : t.rows) v.push_back(std::stod(row.at(c)));
  return v;
}

void write_propensity(const fs::path& path, const std::vector<double>& pi) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < pi.size(); ++i) rows.push_back({std::to_string(i), format_double(pi[i])});
  write_csv(path, {"unit", "pi_hat"}, rows);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  Common common;
  SchemaOptions data;
  ModelConfig model;
  std::string tau_scale = "half-normal";
  std::string out;
  std::string propensity_file;
  std::size_t holdout = 0;
  double risk_lo = 0.860;
  double risk_hi = 0.999;
  double s_mu = 0.0;  // 0: not fixed
  double s_tau = 0.0;
  PropensityOptions prop;
};

int cmd_fit(FitArgs& a) {
  Dataset full = a.data.load();
  a.model.tau_scale_mode = parse_tau_scale_mode(a.tau_scale);
  a.model.response_mode = full.binary_outcome ? ResponseMode::kProbit : ResponseMode::kContinuous;
  a.model.seed = a.common.seed;
  a.model.validate();
  if (a.common.chains < 1 || a.common.threads < 1) throw ValidationError("chains and threads must be positive");
  fs::create_directories(a.out);
  Manifest manifest("fit", a.out);
  std::vector<std::string> warnings;

  if (!a.propensity_file.empty()) full = attach_propensity(full, read_propensity_file(a.propensity_file));

  std::vector<std::size_t> train_rows(full.size()), hold_rows;
  std::iota(train_rows.begin(), train_rows.end(), 0);
  if (a.holdout > 0) std::tie(train_rows, hold_rows) = holdout_indices(full.size(), a.holdout, a.common.seed);
  Dataset train = full.subset(train_rows);

  std::string prop_source = "supplied";
  if (!train.pi_hat) {
    PropensityOptions po = a.prop;
    po.seed = a.common.seed;
    train = attach_propensity(train, fit_propensity(train, po).pi_hat);
    prop_source = "fitted";
  }

  a.model.s_mu = a.s_mu > 0.0 ? a.s_mu : s_mu_from_elicitation(a.risk_lo, a.risk_hi);
  json calib{{"s_mu_source", a.s_mu > 0.0 ? "fixed" : "elicited"}};
  if (a.s_tau > 0.0) {
    a.model.s_tau = a.s_tau;
    calib["s_tau_source"] = "fixed";
  } else if (!hold_rows.empty()) {
    const TauCalibration tc = s_tau_calibrate(full.subset(hold_rows), a.model.s_mu);
    a.model.s_tau = tc.s_tau;
    calib["s_tau_source"] = tc.fallback ? "fallback" : "holdout";
    calib["target_sd"] = tc.target_sd;
    if (tc.fallback) warnings.push_back(tc.warning);
  } else {
    a.model.s_tau = a.model.s_mu / 2.0;
    calib["s_tau_source"] = "s_mu/2";
  }
  a.model.validate();
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  std::vector<ChainFinalState> finals;
  const PosteriorDraws draws =
      run_chains(standard_inputs(train), a.model, a.common.chains, a.common.threads, &finals);

  const fs::path out = a.out;
  for (const auto& f : save_draws(out, draws)) manifest.file(f);
  {
    std::ofstream mu(out / "trees_mu.txt"), tau(out / "trees_tau.txt");
    for (std::size_t c = 0; c < finals.size(); ++c) {
      mu << "chain " << c << '\n' << finals[c].mu_trees;
      tau << "chain " << c << '\n' << finals[c].tau_trees;
    }
    manifest.file("trees_mu.txt");
    manifest.file("trees_tau.txt");
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    rows.push_back({std::to_string(i), std::to_string(train_rows[i]),
                    format_double(train.grid[train.t_idx[i]]), std::to_string(train.z[i]),
                    format_double(train.y[i]), format_double((*train.pi_hat)[i])});
  }
  write_csv(out / "units.csv", {"unit", "row", "t", "z", "y", "pi_hat"}, rows);
  manifest.file("units.csv");
  write_propensity(out / "propensity.csv", *train.pi_hat);
  manifest.file("propensity.csv");
  write_dataset(train, out / "data.csv");
  manifest.file("data.csv");

  manifest["config"] = config_json(a.model);
  manifest["seed"] = a.common.seed;
  manifest["chains"] = a.common.chains;
  manifest["threads"] = a.common.threads;
  manifest["input"] = a.data.data;
  manifest["output"] = a.out;
  manifest["propensity"] = prop_source;
  manifest["calibration"] = calib;
  manifest["holdout_rows"] = hold_rows;
  manifest["grid"] = train.grid.values();
  std::vector<std::string> cats;
  for (std::size_t c = 0; c < train.x.n_cols; ++c) {
    if (train.x.categorical(c)) cats.push_back(train.x.names[c]);
  }
  manifest["categorical"] = cats;
  manifest["continuous_outcome"] = !train.binary_outcome;
  manifest["acceptance"] = {{"mu", moves_json(draws.mu_moves)}, {"tau", moves_json(draws.tau_moves)}};
  manifest["warnings"] = warnings;
  manifest.write();
  std::cout << "fit complete: " << draws.n_draws() << " draws for " << draws.n_units()
            << " units written to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------- summarize

struct SummarizeArgs {
  Common common;
  std::string fit_dir;
  std::string out;
  std::vector<double> target_range;
  int max_depth = 3;
  std::size_t min_leaf = 20;
  int bands = 3;
  std::vector<std::string> group_by;
  std::vector<std::string> overlay;
  std::vector<int> compare;
};

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw ValidationError("missing manifest in " + dir.string() + " (incomplete fit?)");
  std::ifstream in(p);
  return json::parse(in);
}

Dataset load_fit_data(const fs::path& dir, const json& manifest) {
  DatasetSchema s;
  s.propensity = "pi_hat";
  s.categorical = manifest.at("categorical").get<std::vector<std::string>>();
  s.grid = manifest.at("grid").get<std::vector<double>>();
  s.continuous_outcome = manifest.value("continuous_outcome", false);
  return load_dataset(dir / "data.csv", s);
}

void write_targets(const fs::path& path, const std::vector<TargetSummary>& v, bool with_excluded) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : v) {
    std::vector<std::string> r{std::to_string(s.grid_index), format_double(s.t), std::to_string(s.n_units)};
    for (auto& x : summary_row(s.summary)) r.push_back(x);
    if (with_excluded) r.push_back(std::to_string(s.excluded_draws));
    rows.push_back(r);
  }
  std::vector<std::string> header{"grid_index", "t", "n_units", "mean", "lo", "hi"};
  if (with_excluded) header.push_back("excluded_draws");
  write_csv(path, header, rows);
}

int cmd_summarize(SummarizeArgs& a) {
  const fs::path dir = a.fit_dir;
  const json fit_manifest = read_manifest(dir);
  const PosteriorDraws draws = load_draws(dir);
  const Dataset d = load_fit_data(dir, fit_manifest);
  if (d.size() != draws.n_units()) throw ValidationError("fit data and draws disagree on unit count");
  const fs::path out = a.out.empty() ? dir / "summary" : fs::path(a.out);
  fs::create_directories(out);
  Manifest manifest("summarize", out);
  manifest["fit_dir"] = a.fit_dir;
  std::vector<std::string> warnings;

  const RRDraws rr = rr_draws(draws);
  write_targets(out / "rr_by_target.csv", rr_by_target(rr, d.t_idx, d.grid, &warnings), false);
  manifest.file("rr_by_target.csv");
  write_targets(out / "nnt_by_target.csv", nnt_by_target(rr, d.t_idx, d.grid), true);
  manifest.file("nnt_by_target.csv");

  const std::size_t n = d.size();
  std::vector<double> rr_mean(n), p0_mean(n), p1_mean(n);
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      const IntervalSummary s = summarize_draws(rr.rr.column(i));
      rr_mean[i] = s.mean;
      p0_mean[i] = mean(rr.p0.column(i));
      p1_mean[i] = mean(rr.p1.column(i));
      std::vector<std::string> r{std::to_string(i), format_double(d.grid[d.t_idx[i]])};
      for (auto& x : summary_row(s)) r.push_back(x);
      r.push_back(format_double(p0_mean[i]));
      r.push_back(format_double(p1_mean[i]));
      rows.push_back(r);
    }
    write_csv(out / "unit_rr.csv", {"unit", "t", "mean", "lo", "hi", "p0", "p1"}, rows);
    manifest.file("unit_rr.csv");
  }

  // Subgroup analysis on the units inside the target window.
  std::vector<std::size_t> sel;
  if (!a.target_range.empty() && a.target_range.size() != 2) {
    throw ValidationError("--target-range takes two values");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = d.grid[d.t_idx[i]];
    if (a.target_range.empty() || (t >= a.target_range[0] && t <= a.target_range[1])) sel.push_back(i);
  }
  if (sel.empty()) throw ValidationError("empty selection: no units inside the target range");
  std::vector<double> resp, sp0, sp1;
  for (std::size_t i : sel) {
    resp.push_back(rr_mean[i]);
    sp0.push_back(p0_mean[i]);
    sp1.push_back(p1_mean[i]);
  }
  const Covariates xs = d.x.select_rows(sel);
  CartOptions co;
  co.max_depth = a.max_depth;
  co.min_leaf = a.min_leaf;
  if (sel.size() < 2 * co.min_leaf) {
    throw ValidationError("selection has " + std::to_string(sel.size()) +
                          " units, fewer than 2 * min_leaf");
  }
  CartTree cart = fit_the_fit(resp, xs, co);
  annotate_cart(cart, sp0, sp1);
  {
    std::ofstream(out / "cart_tree.txt") << cart.render(xs);
    manifest.file("cart_tree.txt");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < cart.nodes.size(); ++k) {
      const CartNode& c = cart.nodes[k];
      rows.push_back({std::to_string(k), std::to_string(c.parent), std::to_string(c.depth),
                      c.is_leaf() ? "1" : "0", std::to_string(c.members.size()), format_double(c.share),
                      format_double(c.mean), format_double(c.mean_p0), format_double(c.mean_p1),
                      format_double(c.nnt)});
    }
    write_csv(out / "cart_nodes.csv",
              {"node", "parent", "depth", "leaf", "n", "share", "mean_rr", "p0", "p1", "nnt"}, rows);
    manifest.file("cart_nodes.csv");
  }
  auto node_units = [&](int id) {
    std::vector<std::size_t> u;
    for (std::size_t m : cart.nodes[static_cast<std::size_t>(id)].members) u.push_back(sel[m]);
    return u;
  };
  const std::vector<int> leaves = cart.leaves();
  {
    std::vector<std::vector<double>> cols;
    std::vector<std::string> header{"draw"};
    for (int id : leaves) {
      cols.push_back(subgroup_posterior(rr.rr, node_units(id)));
      header.push_back("node" + std::to_string(id));
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < rr.n_draws(); ++r) {
      std::vector<std::string> row{std::to_string(r)};
      for (const auto& c : cols) row.push_back(format_double(c[r]));
      rows.push_back(row);
    }
    write_csv(out / "subgroup_draws.csv", header, rows);
    manifest.file("subgroup_draws.csv");
  }
  {
    int ga = -1, gb = -1;
    if (a.compare.size() == 2) {
      ga = a.compare[0];
      gb = a.compare[1];
      for (int g : {ga, gb}) {
        if (g < 0 || static_cast<std::size_t>(g) >= cart.nodes.size()) {
          throw ValidationError("--compare names an unknown CART node");
        }
      }
    } else if (leaves.size() >= 2) {
      ga = gb = leaves[0];
      for (int id : leaves) {
        if (cart.nodes[static_cast<std::size_t>(id)].mean < cart.nodes[static_cast<std::size_t>(ga)].mean) ga = id;
        if (cart.nodes[static_cast<std::size_t>(id)].mean > cart.nodes[static_cast<std::size_t>(gb)].mean) gb = id;
      }
    }
    std::vector<std::vector<std::string>> rows;
    if (ga >= 0 && ga != gb) {
      const NntDifference nd = nnt_difference_distribution(rr, node_units(ga), node_units(gb));
      for (std::size_t r = 0; r < nd.draws.size(); ++r) rows.push_back({std::to_string(r), format_double(nd.draws[r])});
      manifest["nnt_difference"] = {{"group_a", ga}, {"group_b", gb}, {"excluded", nd.excluded},
                                    {"mean", nd.summary.mean}, {"lo", nd.summary.lo}, {"hi", nd.summary.hi}};
    } else {
      warnings.push_back("CART tree has a single leaf; NNT difference not computed");
    }
    write_csv(out / "nnt_difference.csv", {"draw", "nnt_a_minus_b"}, rows);
    manifest.file("nnt_difference.csv");
  }
  if (d.n_treated() > 0) {
    const auto ex = treated_failure_excess(rr, d);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < ex.size(); ++r) rows.push_back({std::to_string(r), format_double(ex[r])});
    write_csv(out / "treated_failure_excess.csv", {"draw", "excess_per_1000"}, rows);
    manifest.file("treated_failure_excess.csv");
    const IntervalSummary s = summarize_draws(ex);
    manifest["treated_failure_excess"] = {{"mean", s.mean}, {"lo", s.lo}, {"hi", s.hi}};
  }
  {
    std::vector<std::string> cols = a.group_by;
    if (cols.empty()) cols = d.x.names;
    std::vector<std::vector<std::string>> rows;
    for (const auto& name : cols) {
      std::size_t c = d.x.n_cols;
      for (std::size_t k = 0; k < d.x.n_cols; ++k) {
        if (d.x.names[k] == name) c = k;
      }
      if (c == d.x.n_cols) throw ValidationError("--group-by names an unknown covariate '" + name + "'");
      for (const auto& g : grouped_rr_by_target(rr, d.t_idx, d.grid, quantile_band_labels(d.x, c, a.bands))) {
        std::vector<std::string> r{name, g.group, std::to_string(g.target.grid_index),
                                   format_double(g.target.t), std::to_string(g.target.n_units)};
        for (auto& x : summary_row(g.target.summary)) r.push_back(x);
        rows.push_back(r);
      }
    }
    write_csv(out / "grouped_rr_by_target.csv",
              {"covariate", "group", "grid_index", "t", "n_units", "mean", "lo", "hi"}, rows);
    manifest.file("grouped_rr_by_target.csv");
  }
  if (!a.overlay.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& other : a.overlay) {
      const json om = read_manifest(other);
      const PosteriorDraws od = load_draws(other);
      const Dataset odata = load_fit_data(other, om);
      const std::string mode = "kappa_tau=" + format_double(om.at("config").at("kappa_tau").get<double>());
      for (const auto& s : rr_by_target(rr_draws(od), odata.t_idx, odata.grid)) {
        std::vector<std::string> r{mode, other, std::to_string(s.grid_index), format_double(s.t)};
        for (auto& x : summary_row(s.summary)) r.push_back(x);
        rows.push_back(r);
      }
    }
    write_csv(out / "kappa_overlay.csv", {"mode", "fit_dir", "grid_index", "t", "mean", "lo", "hi"}, rows);
    manifest.file("kappa_overlay.csv");
  }
  if (d.pi_hat && d.binary_outcome) {
    try {
      manifest["pseudo_r2"] = targeted_selection_pseudo_r2(d.y, *d.pi_hat);
    } catch (const std::exception& e) {
      warnings.push_back(std::string("pseudo R^2 unavailable: ") + e.what());
    }
  }
  const HeterogeneityRatio hr = structural_heterogeneity_ratio(draws);
  manifest["heterogeneity_ratio"] = {{"ratio", hr.ratio}, {"used", hr.used_draws}, {"excluded", hr.excluded_draws}};
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  manifest["warnings"] = warnings;
  manifest.write();
  std::cout << "summary written to " << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::vector<std::string> scenarios{"A", "B", "C", "D", "E"};
  std::vector<std::string> models{"tsBCF1", "tsBCF2", "BCF-mode", "BART-mode"};
  BenchmarkConfig bench;
  std::string tau_scale = "half-normal";
  std::string out;
};

int cmd_simulate(SimulateArgs& a) {
  BenchmarkConfig& b = a.bench;
  b.scenarios.clear();
  for (const auto& s : a.scenarios) b.scenarios.push_back(parse_scenario(s));
  b.models.clear();
  for (const auto& m : a.models) b.models.push_back(parse_model_mode(m));
  b.seed = a.common.seed;
  b.threads = a.common.threads;
  b.sampler.tau_scale_mode = parse_tau_scale_mode(a.tau_scale);
  b.sampler.seed = a.common.seed;
  b.validate();
  fs::create_directories(a.out);
  Manifest manifest("simulate", a.out);
  const BenchmarkResult res = run_benchmark(b);

  const fs::path out = a.out;
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : res.rows) {
    rows.push_back({to_string(r.scenario), to_string(r.model), format_double(r.rmse_mean),
                    format_double(r.rmse_sd), format_double(r.coverage), format_double(r.length),
                    std::to_string(r.n_ok), std::to_string(r.n_failed)});
  }
  write_csv(out / "metrics.csv",
            {"scenario", "model", "rmse", "rmse_sd", "coverage", "interval_length", "n_ok", "n_failed"}, rows);
  manifest.file("metrics.csv");
  rows.clear();
  std::vector<std::vector<std::string>> curves;
  for (const auto& r : res.replicates) {
    rows.push_back({to_string(r.scenario), to_string(r.model), std::to_string(r.replicate), r.ok ? "1" : "0",
                    format_double(r.metrics.rmse), format_double(r.metrics.coverage),
                    format_double(r.metrics.length), r.error});
    for (std::size_t k = 0; k < r.rr_curve.size(); ++k) {
      curves.push_back({to_string(r.scenario), to_string(r.model), std::to_string(r.replicate),
                        std::to_string(k), format_double(r.rr_curve[k])});
    }
  }
  write_csv(out / "replicates.csv",
            {"scenario", "model", "replicate", "ok", "rmse", "coverage", "interval_length", "error"}, rows);
  manifest.file("replicates.csv");
  write_csv(out / "rr_curves.csv", {"scenario", "model", "replicate", "grid_index", "mean_rr"}, curves);
  manifest.file("rr_curves.csv");

  manifest["seed"] = b.seed;
  manifest["threads"] = b.threads;
  manifest["scenarios"] = a.scenarios;
  manifest["models"] = a.models;
  manifest["n"] = b.n;
  manifest["replicates"] = b.replicates;
  manifest["rho"] = b.rho;
  manifest["sampler"] = config_json(b.sampler);
  manifest["propensity"] = {{"n_trees", b.propensity.n_trees}, {"burn", b.propensity.n_burn},
                            {"draws", b.propensity.n_draws}};
  manifest.write();

  std::cout << "scenario,model,rmse,rmse_sd,coverage,interval_length\n";
  for (const auto& r : res.rows) {
    std::cout << to_string(r.scenario) << ',' << to_string(r.model) << ',' << format_double(r.rmse_mean) << ','
              << format_double(r.rmse_sd) << ',' << format_double(r.coverage) << ','
              << format_double(r.length) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
  Common common;
  SchemaOptions data;
  double risk_lo = 0.860;
  double risk_hi = 0.999;
  double divisor = 3.3;
  bool het_grid = false;
  std::size_t het_n = 1000;
  std::string out;
};

int cmd_calibrate(CalibrateArgs& a) {
  const Dataset d = a.data.load();
  const double s_mu = s_mu_from_elicitation(a.risk_lo, a.risk_hi, a.divisor);
  const TauCalibration tc = s_tau_calibrate(d, s_mu);
  if (tc.fallback) std::cerr << "warning: " << tc.warning << '\n';
  std::cout << "s_mu = " << format_double(s_mu) << '\n' << "s_tau = " << format_double(tc.s_tau) << '\n';
  if (a.out.empty()) return 0;
  fs::create_directories(a.out);
  const fs::path out = a.out;
  Manifest manifest("calibrate", out);
  {
    std::ofstream f(out / "calibration.ini");
    f << "# pass to 'tsbcf fit --config'\n"
      << "[fit]\n"
      << "s-mu = " << format_double(s_mu) << '\n'
      << "s-tau = " << format_double(tc.s_tau) << '\n';
  }
  manifest.file("calibration.ini");
  if (a.het_grid) {
    RngStream rng(a.common.seed, 2000);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : structural_heterogeneity_grid(default_het_alphas(), default_het_taus(),
                                                       default_het_sds(), a.het_n, rng)) {
      rows.push_back({format_double(r.alpha), format_double(r.tau), format_double(r.mu_sd), format_double(r.rr)});
    }
    write_csv(out / "het_grid.csv", {"alpha", "tau", "mu_sd", "rr"}, rows);
    manifest.file("het_grid.csv");
  }
  manifest["input"] = a.data.data;
  manifest["seed"] = a.common.seed;
  manifest["s_mu"] = s_mu;
  manifest["s_tau"] = tc.s_tau;
  manifest["target_sd"] = tc.target_sd;
  manifest["fallback"] = tc.fallback;
  manifest.write();
  return 0;
}

// ---------------------------------------------------------------- propensity

struct PropensityArgs {
  Common common;
  SchemaOptions data;
  PropensityOptions prop;
  bool no_target = false;
  std::string out;
};

int cmd_propensity(PropensityArgs& a) {
  const Dataset d = a.data.load();
  a.prop.seed = a.common.seed;
  a.prop.include_target = !a.no_target;
  const PropensityFit fit = fit_propensity(d, a.prop);
  fs::create_directories(a.out);
  Manifest manifest("propensity", a.out);
  write_propensity(fs::path(a.out) / "propensity.csv", fit.pi_hat);
  manifest.file("propensity.csv");
  manifest["input"] = a.data.data;
  manifest["seed"] = a.common.seed;
  manifest["n_trees"] = a.prop.n_trees;
  manifest["burn"] = a.prop.n_burn;
  manifest["draws"] = a.prop.n_draws;
  manifest["include_target"] = a.prop.include_target;
  manifest.write();
  return 0;
}

void add_propensity_options(CLI::App* app, PropensityOptions& p) {
  app->add_option("--prop-trees", p.n_trees, "Propensity trees")->capture_default_str();
  app->add_option("--prop-burn", p.n_burn, "Propensity burn-in")->capture_default_str();
  app->add_option("--prop-draws", p.n_draws, "Propensity draws")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Targeted smooth Bayesian causal forests"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file; section [fit], [simulate], ... per command (flags override)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the model and write posterior draws");
  add_common(f, fit.common);
  fit.data.add(f);
  add_model(f, fit.model, fit.tau_scale);
  add_propensity_options(f, fit.prop);
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_option("--propensity-file", fit.propensity_file, "propensity.csv with a pi_hat column");
  f->add_option("--holdout", fit.holdout, "Units held out to calibrate s_tau (excluded from the fit)");
  f->add_option("--risk-lo", fit.risk_lo, "Elicited low baseline risk")->capture_default_str();
  f->add_option("--risk-hi", fit.risk_hi, "Elicited high baseline risk")->capture_default_str();
  f->add_option("--s-mu", fit.s_mu, "Fixed prognostic leaf scale (default: elicited)");
  f->add_option("--s-tau", fit.s_tau, "Fixed treatment leaf scale (default: calibrated)");

  SummarizeArgs sum;
  auto* s = app.add_subcommand("summarize", "Posterior summaries and plot data from a fit");
  add_common(s, sum.common);
  s->add_option("--fit", sum.fit_dir, "Fit directory")->required();
  s->add_option("--out", sum.out, "Output directory (default: <fit>/summary)");
  s->add_option("--target-range", sum.target_range, "Target window lo,hi for the subgroup tree")
      ->delimiter(',')
      ->expected(2);
  s->add_option("--max-depth", sum.max_depth)->capture_default_str();
  s->add_option("--min-leaf", sum.min_leaf)->capture_default_str();
  s->add_option("--bands", sum.bands, "Quantile bands for continuous grouping")->capture_default_str();
  s->add_option("--group-by", sum.group_by, "Covariates for grouped RR curves")->delimiter(',');
  s->add_option("--overlay", sum.overlay, "Fit directories merged into kappa_overlay.csv")->delimiter(',');
  s->add_option("--compare", sum.compare, "Two CART node ids for the NNT difference")->delimiter(',')->expected(2);

  SimulateArgs sim;
  sim.bench.sampler = default_benchmark_sampler();
  auto* m = app.add_subcommand("simulate", "Run the simulation benchmark");
  add_common(m, sim.common);
  m->add_option("--scenarios", sim.scenarios, "Scenario ids")->delimiter(',')->capture_default_str();
  m->add_option("--models", sim.models, "Model modes")->delimiter(',')->capture_default_str();
  m->add_option("--n", sim.bench.n, "Units per replicate")->capture_default_str();
  m->add_option("--replicates", sim.bench.replicates)->capture_default_str();
  m->add_option("--rho", sim.bench.rho)->capture_default_str();
  add_model(m, sim.bench.sampler, sim.tau_scale);
  m->add_option("--s-mu", sim.bench.sampler.s_mu)->capture_default_str();
  m->add_option("--s-tau", sim.bench.sampler.s_tau)->capture_default_str();
  add_propensity_options(m, sim.bench.propensity);
  m->add_option("--out", sim.out, "Output directory")->required();

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Prior leaf scales from elicitation and a holdout sample");
  add_common(c, cal.common);
  cal.data.add(c);
  c->add_option("--risk-lo", cal.risk_lo)->capture_default_str();
  c->add_option("--risk-hi", cal.risk_hi)->capture_default_str();
  c->add_option("--divisor", cal.divisor)->capture_default_str();
  c->add_flag("--het-grid", cal.het_grid, "Write the structural heterogeneity grid");
  c->add_option("--het-n", cal.het_n)->capture_default_str();
  c->add_option("--out", cal.out, "Output directory");

  PropensityArgs pr;
  auto* p = app.add_subcommand("propensity", "Fit propensity scores");
  add_common(p, pr.common);
  pr.data.add(p);
  add_propensity_options(p, pr.prop);
  p->add_flag("--no-target", pr.no_target, "Leave the target covariate out of the model");
  p->add_option("--out", pr.out, "Output directory")->required();

  // --config may follow the subcommand name; it belongs to the top-level app.
  std::vector<std::string> ordered, config;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      config = {args[k], args[k + 1]};
      ++k;
    } else if (args[k].rfind("--config=", 0) == 0) {
      config = {args[k]};
    } else {
      ordered.push_back(args[k]);
    }
  }
  ordered.insert(ordered.begin(), config.begin(), config.end());
  std::vector<std::string> rev(ordered.rbegin(), ordered.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (f->parsed()) return cmd_fit(fit);
    if (s->parsed()) return cmd_summarize(sum);
    if (m->parsed()) return cmd_simulate(sim);
    if (c->parsed()) return cmd_calibrate(cal);
    if (p->parsed()) return cmd_propensity(pr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const SamplerError& e) {
    std::cerr << "error: sampler failed at iteration " << e.iteration() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace tsbcf::cli
