#include "tsbcf/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tsbcf {

double relative_risk(double f0, double f1) {
  const double p0 = normal_cdf(f0);
  const double p1 = normal_cdf(f1);
  if (p0 > 1e-200 && p1 > 1e-200) return p1 / p0;
  return std::exp(log_normal_cdf(f1) - log_normal_cdf(f0));
}

RRDraws rr_draws(const PosteriorDraws& d) {
  RRDraws out;
  const std::size_t R = d.n_draws(), n = d.n_units();
  out.rr = DrawMatrix(R, n);
  out.p0 = DrawMatrix(R, n);
  out.p1 = DrawMatrix(R, n);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double f0 = d.f0(r, i), f1 = d.f1(r, i);
      out.p0(r, i) = normal_cdf(f0);
      out.p1(r, i) = normal_cdf(f1);
      out.rr(r, i) = relative_risk(f0, f1);
    }
  }
  return out;
}

double nnt(double p0, double p1) {
  if (p0 == p1) return kNntInfinite;
  return 1.0 / (p0 - p1);
}

std::vector<double> subgroup_posterior(const DrawMatrix& m, std::span<const std::size_t> members) {
  if (members.empty()) throw std::invalid_argument("empty subgroup");
  std::vector<double> out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t i : members) s += m(r, i);
    out[r] = s / static_cast<double>(members.size());
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> units_by_target(std::span<const std::size_t> t_idx,
                                                      std::size_t T,
                                                      std::span<const std::size_t> subset) {
  std::vector<std::vector<std::size_t>> g(T);
  for (std::size_t i : subset) g[t_idx[i]].push_back(i);
  return g;
}

std::vector<std::size_t> all_units(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<TargetSummary> rr_by_target_subset(const RRDraws& rr, std::span<const std::size_t> t_idx,
                                               const TargetGrid& grid,
                                               std::span<const std::size_t> subset,
                                               std::vector<std::string>* warnings) {
  std::vector<TargetSummary> out;
  const auto groups = units_by_target(t_idx, grid.size(), subset);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    if (groups[t].empty()) {
      if (warnings) warnings->push_back("no units at grid point " + std::to_string(grid[t]));
      continue;
    }
    TargetSummary s;
    s.grid_index = t;
    s.t = grid[t];
    s.n_units = groups[t].size();
    s.summary = summarize_draws(subgroup_posterior(rr.rr, groups[t]));
    out.push_back(s);
  }
  return out;
}

}  // namespace

std::vector<TargetSummary> rr_by_target(const RRDraws& rr, std::span<const std::size_t> t_idx,
                                        const TargetGrid& grid, std::vector<std::string>* warnings) {
  const auto units = all_units(rr.n_units());
  return rr_by_target_subset(rr, t_idx, grid, units, warnings);
}

std::vector<TargetSummary> nnt_by_target(const RRDraws& rr, std::span<const std::size_t> t_idx,
                                         const TargetGrid& grid) {
  std::vector<TargetSummary> out;
  const auto units = all_units(rr.n_units());
  const auto groups = units_by_target(t_idx, grid.size(), units);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    if (groups[t].empty()) continue;
    const auto p0 = subgroup_posterior(rr.p0, groups[t]);
    const auto p1 = subgroup_posterior(rr.p1, groups[t]);
    std::vector<double> v;
    TargetSummary s;
    for (std::size_t r = 0; r < p0.size(); ++r) {
      const double x = nnt(p0[r], p1[r]);
      if (std::isfinite(x)) {
        v.push_back(x);
      } else {
        ++s.excluded_draws;
      }
    }
    s.grid_index = t;
    s.t = grid[t];
    s.n_units = groups[t].size();
    if (v.empty()) {
      s.summary = {NAN, NAN, NAN};
    } else {
      s.summary = summarize_draws(v);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<int> CartTree::leaves() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].is_leaf()) out.push_back(static_cast<int>(k));
  }
  return out;
}

double CartTree::sse() const {
  double s = 0.0;
  for (int k : leaves()) s += nodes[static_cast<std::size_t>(k)].sse;
  return s;
}

namespace {

struct SplitCandidate {
  double reduction = 0.0;
  std::size_t var = 0;
  double threshold = 0.0;
  std::vector<bool> left_levels;
  bool found = false;
};

double node_sse(std::span<const double> y, const std::vector<std::size_t>& m, double& mean_out) {
  double s = 0.0;
  for (std::size_t i : m) s += y[i];
  mean_out = s / static_cast<double>(m.size());
  double sse = 0.0;
  for (std::size_t i : m) sse += (y[i] - mean_out) * (y[i] - mean_out);
  return sse;
}

// Best split over ordered keys: members sorted by key, candidate cuts between distinct keys.
void scan_ordered(std::span<const double> y, double center,
                  const std::vector<std::pair<double, std::size_t>>& sorted, std::size_t min_leaf,
                  double parent_sse, std::size_t var, SplitCandidate& best,
                  const std::vector<std::size_t>* level_order, std::size_t n_levels) {
  const std::size_t n = sorted.size();
  double total = 0.0, total2 = 0.0;
  for (const auto& [k, i] : sorted) {
    const double v = y[i] - center;
    total += v;
    total2 += v * v;
  }
  double s = 0.0, s2 = 0.0;
  for (std::size_t a = 0; a + 1 < n; ++a) {
    const double v = y[sorted[a].second] - center;
    s += v;
    s2 += v * v;
    if (sorted[a].first == sorted[a + 1].first) continue;
    const std::size_t nl = a + 1, nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double sse_l = s2 - s * s / static_cast<double>(nl);
    const double rs = total - s, rs2 = total2 - s2;
    const double sse_r = rs2 - rs * rs / static_cast<double>(nr);
    const double red = parent_sse - std::max(0.0, sse_l) - std::max(0.0, sse_r);
    if (red > best.reduction) {
      best.reduction = red;
      best.var = var;
      best.found = true;
      if (level_order) {
        best.left_levels.assign(n_levels, false);
        const auto cut = static_cast<std::size_t>(sorted[a].first);
        for (std::size_t k = 0; k <= cut; ++k) best.left_levels[(*level_order)[k]] = true;
        best.threshold = 0.0;
      } else {
        best.left_levels.clear();
        best.threshold = sorted[a].first;
      }
    }
  }
}

void grow_cart(CartTree& tree, int id, std::span<const double> y, const Covariates& x,
               const CartOptions& opt) {
  CartNode& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.depth >= opt.max_depth || node.members.size() < 2 * opt.min_leaf) return;
  const double parent_sse = node.sse;
  const double center = node.mean;
  const double noise = 1e-24 * static_cast<double>(node.members.size()) * std::max(1.0, center * center);
  if (!(parent_sse > noise)) return;
  SplitCandidate best;
  const std::vector<std::size_t> members = node.members;
  std::vector<std::pair<double, std::size_t>> sorted;
  for (std::size_t v = 0; v < x.n_cols; ++v) {
    sorted.clear();
    if (x.categorical(v)) {
      const std::size_t L = x.n_levels(v);
      std::vector<double> sum(L, 0.0), cnt(L, 0.0);
      for (std::size_t i : members) {
        const auto l = static_cast<std::size_t>(x(i, v));
        sum[l] += y[i];
        cnt[l] += 1.0;
      }
      std::vector<std::size_t> order;
      for (std::size_t l = 0; l < L; ++l) {
        if (cnt[l] > 0) order.push_back(l);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sum[a] / cnt[a] < sum[b] / cnt[b];
      });
      std::vector<double> rank(L, 0.0);
      for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<double>(k);
      for (std::size_t i : members) sorted.emplace_back(rank[static_cast<std::size_t>(x(i, v))], i);
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      scan_ordered(y, center, sorted, opt.min_leaf, parent_sse, v, best, &order, L);
    } else {
      for (std::size_t i : members) sorted.emplace_back(x(i, v), i);
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      scan_ordered(y, center, sorted, opt.min_leaf, parent_sse, v, best, nullptr, 0);
    }
  }
  if (!best.found || !(best.reduction > 1e-12 * parent_sse)) return;

  CartNode left, right;
  for (CartNode* c : {&left, &right}) {
    c->parent = id;
    c->depth = node.depth + 1;
  }
  for (std::size_t i : members) {
    const double v = x(i, best.var);
    const bool go_left = best.left_levels.empty()
                             ? v <= best.threshold
                             : best.left_levels[static_cast<std::size_t>(v)];
    (go_left ? left : right).members.push_back(i);
  }
  const double n_root = static_cast<double>(tree.nodes[0].members.size());
  for (CartNode* c : {&left, &right}) {
    c->sse = node_sse(y, c->members, c->mean);
    c->share = static_cast<double>(c->members.size()) / n_root;
  }
  const int l = static_cast<int>(tree.nodes.size());
  {
    CartNode& p = tree.nodes[static_cast<std::size_t>(id)];
    p.var = best.var;
    p.threshold = best.threshold;
    p.left_levels = best.left_levels;
    p.left = l;
    p.right = l + 1;
  }
  tree.nodes.push_back(std::move(left));
  tree.nodes.push_back(std::move(right));
  grow_cart(tree, l, y, x, opt);
  grow_cart(tree, l + 1, y, x, opt);
}

}  // namespace

CartTree fit_the_fit(std::span<const double> response, const Covariates& x,
                     const CartOptions& options) {
  if (response.size() != x.n_rows) throw std::invalid_argument("response length mismatch");
  if (options.min_leaf < 1 || options.max_depth < 0) throw std::invalid_argument("bad CART options");
  if (response.size() < 2 * options.min_leaf) {
    throw std::invalid_argument("fit_the_fit needs at least 2 * min_leaf units");
  }
  CartTree tree;
  CartNode root;
  root.members = all_units(response.size());
  root.sse = node_sse(response, root.members, root.mean);
  root.share = 1.0;
  tree.nodes.push_back(std::move(root));
  grow_cart(tree, 0, response, x, options);
  return tree;
}

void annotate_cart(CartTree& tree, std::span<const double> p0, std::span<const double> p1) {
  for (auto& node : tree.nodes) {
    double a = 0.0, b = 0.0;
    for (std::size_t i : node.members) {
      a += p0[i];
      b += p1[i];
    }
    node.mean_p0 = a / static_cast<double>(node.members.size());
    node.mean_p1 = b / static_cast<double>(node.members.size());
    node.nnt = nnt(node.mean_p0, node.mean_p1);
  }
}

namespace {

std::string rule_text(const CartNode& p, const Covariates& x, bool left) {
  const std::string& name = x.names[p.var];
  if (p.left_levels.empty()) {
    std::ostringstream os;
    os << name << (left ? " <= " : " > ") << p.threshold;
    return os.str();
  }
  std::string s = name + " in {";
  bool first = true;
  for (std::size_t k = 0; k < p.left_levels.size(); ++k) {
    if (p.left_levels[k] != left) continue;
    s += (first ? "" : ",") + x.levels[p.var][k];
    first = false;
  }
  return s + "}";
}

void render_node(const CartTree& tree, int id, const Covariates& x, int indent,
                 const std::string& label, std::ostringstream& os) {
  const CartNode& n = tree.nodes[static_cast<std::size_t>(id)];
  os << std::string(static_cast<std::size_t>(indent) * 2, ' ');
  if (!label.empty()) os << label << ": ";
  os << "[" << id << "] n=" << n.members.size() << " (" << std::fixed << std::setprecision(1)
     << 100.0 * n.share << "%) mean=" << std::setprecision(4) << n.mean;
  if (n.mean_p0 > 0.0 || n.mean_p1 > 0.0) {
    os << " NNT=";
    if (std::isfinite(n.nnt)) {
      os << std::setprecision(1) << n.nnt;
    } else {
      os << "inf";
    }
  }
  os.unsetf(std::ios::floatfield);
  os << '\n';
  if (n.is_leaf()) return;
  render_node(tree, n.left, x, indent + 1, rule_text(n, x, true), os);
  render_node(tree, n.right, x, indent + 1, rule_text(n, x, false), os);
}

}  // namespace

std::string CartTree::render(const Covariates& x) const {
  std::ostringstream os;
  if (!nodes.empty()) render_node(*this, 0, x, 0, "", os);
  return os.str();
}

NntDifference nnt_difference_distribution(const RRDraws& rr, std::span<const std::size_t> a,
                                          std::span<const std::size_t> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("empty group");
  const auto a0 = subgroup_posterior(rr.p0, a), a1 = subgroup_posterior(rr.p1, a);
  const auto b0 = subgroup_posterior(rr.p0, b), b1 = subgroup_posterior(rr.p1, b);
  NntDifference out;
  std::vector<double> finite;
  for (std::size_t r = 0; r < a0.size(); ++r) {
    const double na = nnt(a0[r], a1[r]);
    const double nb = nnt(b0[r], b1[r]);
    if (!std::isfinite(na) || !std::isfinite(nb)) {
      out.draws.push_back(NAN);
      ++out.excluded;
      continue;
    }
    out.draws.push_back(na - nb);
    finite.push_back(na - nb);
  }
  out.summary = finite.empty() ? IntervalSummary{NAN, NAN, NAN} : summarize_draws(finite);
  return out;
}

std::vector<double> treated_failure_excess(const RRDraws& rr, const Dataset& d) {
  std::vector<std::size_t> treated;
  double observed = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.z[i] != 1) continue;
    treated.push_back(i);
    observed += 1.0 - d.y[i];
  }
  if (treated.empty()) throw std::invalid_argument("no treated units");
  const double scale = 1000.0 / static_cast<double>(treated.size());
  std::vector<double> out(rr.n_draws());
  for (std::size_t r = 0; r < rr.n_draws(); ++r) {
    double expected = 0.0;
    for (std::size_t i : treated) expected += 1.0 - rr.p0(r, i);
    out[r] = (observed - expected) * scale;
  }
  return out;
}

LogisticFit logistic_regression(std::span<const double> y, std::span<const double> x) {
  const std::size_t n = y.size();
  if (n == 0 || x.size() != n) throw std::invalid_argument("logistic regression: bad input");
  const double ybar = mean(y);
  if (ybar <= 0.0 || ybar >= 1.0) {
    throw std::runtime_error("logistic regression: outcome is constant");
  }
  LogisticFit fit;
  fit.null_loglik = static_cast<double>(n) * (ybar * std::log(ybar) + (1 - ybar) * std::log(1 - ybar));
  if (variance(x) == 0.0) {
    fit.intercept = std::log(ybar / (1 - ybar));
    fit.loglik = fit.null_loglik;
    return fit;
  }
  double b0 = std::log(ybar / (1 - ybar)), b1 = 0.0;
  for (int it = 1; it <= 100; ++it) {
    double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = b0 + b1 * x[i];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double w = p * (1 - p);
      g0 += y[i] - p;
      g1 += (y[i] - p) * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0) || !std::isfinite(det)) {
      throw std::runtime_error("logistic regression: singular information (separation)");
    }
    const double d0 = (h11 * g0 - h01 * g1) / det;
    const double d1 = (h00 * g1 - h01 * g0) / det;
    b0 += d0;
    b1 += d1;
    fit.iterations = it;
    if (!std::isfinite(b0) || !std::isfinite(b1) || std::abs(b1) > 1e6) {
      throw std::runtime_error("logistic regression diverged (separation)");
    }
    if (std::max(std::abs(d0), std::abs(d1)) < 1e-8) {
      fit.intercept = b0;
      fit.slope = b1;
      double ll = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double eta = b0 + b1 * x[i];
        // log p = -log(1 + e^-eta), log(1-p) = -log(1 + e^eta)
        ll += y[i] > 0.5 ? -std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
      }
      fit.loglik = ll;
      return fit;
    }
  }
  throw std::runtime_error("logistic regression did not converge in 100 iterations");
}

double targeted_selection_pseudo_r2(std::span<const double> y, std::span<const double> pi_hat) {
  for (double p : pi_hat) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("propensity outside (0, 1)");
  }
  const LogisticFit f = logistic_regression(y, pi_hat);
  return 1.0 - f.loglik / f.null_loglik;
}

std::vector<GroupedTargetSummary> grouped_rr_by_target(const RRDraws& rr,
                                                       std::span<const std::size_t> t_idx,
                                                       const TargetGrid& grid,
                                                       const std::vector<std::string>& labels) {
  if (labels.size() != rr.n_units()) throw std::invalid_argument("label count mismatch");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<GroupedTargetSummary> out;
  for (const auto& [label, members] : groups) {
    for (const auto& s : rr_by_target_subset(rr, t_idx, grid, members, nullptr)) {
      out.push_back({label, s});
    }
  }
  return out;
}

std::vector<std::string> quantile_band_labels(const Covariates& x, std::size_t col, int bands) {
  std::vector<std::string> out(x.n_rows);
  const std::string& name = x.names[col];
  if (x.categorical(col)) {
    for (std::size_t i = 0; i < x.n_rows; ++i) {
      out[i] = name + ":" + x.levels[col][static_cast<std::size_t>(x(i, col))];
    }
    return out;
  }
  std::vector<double> v(x.n_rows);
  for (std::size_t i = 0; i < x.n_rows; ++i) v[i] = x(i, col);
  std::sort(v.begin(), v.end());
  std::vector<double> cuts;
  for (int k = 1; k < bands; ++k) cuts.push_back(quantile_sorted(v, static_cast<double>(k) / bands));
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    const auto band = std::upper_bound(cuts.begin(), cuts.end(), x(i, col)) - cuts.begin();
    out[i] = name + ":Q" + std::to_string(band + 1);
  }
  return out;
}

double mean_abs_second_difference(std::span<const double> v) {
  if (v.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t k = 2; k < v.size(); ++k) s += std::abs(v[k] - 2.0 * v[k - 1] + v[k - 2]);
  return s / static_cast<double>(v.size() - 2);
}

}  // namespace tsbcf
