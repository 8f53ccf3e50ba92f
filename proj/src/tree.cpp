#include "tsbcf/tree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tsbcf {

bool DecisionRule::goes_left(double value) const {
  if (left_levels.empty()) return value <= threshold;
  const auto code = static_cast<std::size_t>(value);
  return code < left_levels.size() && left_levels[code];
}

Tree::Tree(std::size_t leaf_dim) : leaf_dim_(leaf_dim) {
  if (leaf_dim == 0) throw std::invalid_argument("tree leaf dimension must be positive");
  nodes_.emplace_back();
  nodes_[0].curve.assign(leaf_dim, 0.0);
}

int Tree::allocate() {
  if (!free_.empty()) {
    int id = free_.back();
    free_.pop_back();
    return id;
  }
  nodes_.emplace_back();
  return static_cast<int>(nodes_.size() - 1);
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].live && nodes_[k].is_leaf()) out.push_back(static_cast<int>(k));
  }
  return out;
}

bool Tree::is_nog(int id) const {
  const TreeNode& nd = node(id);
  return nd.live && !nd.is_leaf() && node(nd.left).is_leaf() && node(nd.right).is_leaf();
}

std::vector<int> Tree::nogs() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (is_nog(static_cast<int>(k))) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::size_t Tree::n_leaves() const {
  std::size_t c = 0;
  for (const auto& nd : nodes_) c += nd.live && nd.is_leaf();
  return c;
}

std::size_t Tree::n_nogs() const {
  std::size_t c = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) c += is_nog(static_cast<int>(k));
  return c;
}

int Tree::max_depth() const {
  int d = 0;
  for (const auto& nd : nodes_) {
    if (nd.live) d = std::max(d, nd.depth);
  }
  return d;
}

std::pair<int, int> Tree::split(int leaf, DecisionRule rule) {
  if (!node(leaf).live || !node(leaf).is_leaf()) throw std::logic_error("split of a non-leaf");
  const int l = allocate();
  const int r = allocate();
  for (int c : {l, r}) {
    TreeNode& nd = node(c);
    nd = TreeNode{};
    nd.parent = leaf;
    nd.depth = node(leaf).depth + 1;
    nd.curve.assign(leaf_dim_, 0.0);
  }
  TreeNode& p = node(leaf);
  p.left = l;
  p.right = r;
  p.rule = std::move(rule);
  return {l, r};
}

void Tree::collapse(int id) {
  if (!is_nog(id)) throw std::logic_error("collapse of a node that is not a nog");
  TreeNode& p = node(id);
  const int l = p.left;
  const int r = p.right;
  node(l).live = false;
  node(r).live = false;
  free_.push_back(r);
  free_.push_back(l);
  p.left = -1;
  p.right = -1;
  p.rule = DecisionRule{};
  if (p.curve.size() != leaf_dim_) p.curve.assign(leaf_dim_, 0.0);
}

int Tree::find_leaf(const double* row) const {
  int id = 0;
  while (!node(id).is_leaf()) {
    const TreeNode& nd = node(id);
    id = nd.rule.goes_left(row[nd.rule.var]) ? nd.left : nd.right;
  }
  return id;
}

namespace {

bool same_subtree(const Tree& a, int ia, const Tree& b, int ib) {
  const TreeNode& x = a.node(ia);
  const TreeNode& y = b.node(ib);
  if (x.is_leaf() != y.is_leaf()) return false;
  if (x.is_leaf()) return x.curve == y.curve;
  if (x.rule.var != y.rule.var || x.rule.left_levels != y.rule.left_levels) return false;
  if (!x.rule.is_categorical() && x.rule.threshold != y.rule.threshold) return false;
  return same_subtree(a, x.left, b, y.left) && same_subtree(a, x.right, b, y.right);
}

}  // namespace

bool Tree::operator==(const Tree& other) const {
  return leaf_dim_ == other.leaf_dim_ && same_subtree(*this, 0, other, 0);
}

double TreePrior::split_probability(int depth) const {
  if (depth < 0) throw std::invalid_argument("negative depth");
  return eta * std::pow(1.0 + depth, -beta);
}

void LeafSuffStats::add(std::size_t slot, double r, double weight) {
  count[slot] += 1.0;
  w[slot] += weight;
  wr[slot] += weight * r;
  wr2 += weight * r * r;
  log_w += std::log(weight);
  ++n;
}

void LeafSuffStats::add_weighted(std::size_t slot, double weight, double weighted_r,
                                 double weighted_r2) {
  count[slot] += 1.0;
  w[slot] += weight;
  wr[slot] += weighted_r;
  wr2 += weighted_r2;
  ++n;
}

// All leaf computations go through B = I + S C S with S = diag(sqrt(w)). B is well
// conditioned even when C is nearly singular, unlike C^{-1} + diag(w).

double leaf_log_evidence(const LeafSuffStats& st, const FactoredKernel& kernel) {
  const auto T = kernel.dim();
  if (static_cast<Eigen::Index>(st.dim()) != T) throw std::invalid_argument("leaf stats dimension mismatch");
  if (T == 1) {
    const double c = kernel.cov(0, 0);
    const double B = 1.0 + st.w[0] * c;
    const double q = c * st.wr[0] * st.wr[0] / B;
    return -0.5 * std::log(B) - 0.5 * (st.wr2 - q);
  }
  Eigen::VectorXd s(T), b(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    s[t] = std::sqrt(st.w[t]);
    b[t] = st.wr[t];
  }
  Eigen::MatrixXd B = s.asDiagonal() * kernel.cov * s.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw SingularKernelError("leaf factorization failed");
  const Eigen::VectorXd cb = kernel.cov * b;
  const Eigen::VectorXd v = llt.matrixL().solve(s.cwiseProduct(cb));
  const double q = b.dot(cb) - v.squaredNorm();
  const double logdet_b = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * logdet_b - 0.5 * (st.wr2 - q);
}

double marginal_loglik_heteroskedastic(const LeafSuffStats& st, const FactoredKernel& kernel) {
  const double n = static_cast<double>(st.n);
  return leaf_log_evidence(st, kernel) - 0.5 * n * std::log(2.0 * std::numbers::pi) + 0.5 * st.log_w;
}

namespace {

LeafSuffStats to_weighted(const LeafSuffStats& st, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  LeafSuffStats out = st;
  for (std::size_t t = 0; t < st.dim(); ++t) {
    out.w[t] = st.count[t] / sigma2;
    out.wr[t] = st.wr[t] / sigma2;
  }
  out.wr2 = st.wr2 / sigma2;
  out.log_w = -static_cast<double>(st.n) * std::log(sigma2);
  return out;
}

}  // namespace

double marginal_loglik_homoskedastic(const LeafSuffStats& st, double sigma2,
                                     const FactoredKernel& kernel) {
  return marginal_loglik_heteroskedastic(to_weighted(st, sigma2), kernel);
}

Eigen::VectorXd sample_leaf_curve(const LeafSuffStats& st, const FactoredKernel& kernel,
                                  RngStream& rng) {
  const auto T = kernel.dim();
  if (static_cast<Eigen::Index>(st.dim()) != T) throw std::invalid_argument("leaf stats dimension mismatch");
  if (T == 1) {
    const double c = kernel.cov(0, 0);
    const double w = st.w[0];
    const double f0 = std::sqrt(c) * rng.normal();
    const double eta = rng.normal();
    Eigen::VectorXd out(1);
    if (w <= 0.0) {
      out[0] = f0;
      return out;
    }
    const double sw = std::sqrt(w);
    const double B = 1.0 + w * c;
    out[0] = f0 + c * sw / B * (st.wr[0] / sw - sw * f0 - eta);
    return out;
  }
  // Matheron's rule: prior draw corrected by the scaled pseudo-observations S y_hat.
  Eigen::VectorXd e(T), eta(T);
  for (Eigen::Index t = 0; t < T; ++t) e[t] = rng.normal();
  for (Eigen::Index t = 0; t < T; ++t) eta[t] = rng.normal();
  const Eigen::VectorXd f0 = kernel.chol_cov.triangularView<Eigen::Lower>() * e;
  Eigen::VectorXd s(T), sy(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    s[t] = std::sqrt(st.w[t]);
    sy[t] = st.w[t] > 0.0 ? st.wr[t] / s[t] : 0.0;
  }
  Eigen::MatrixXd B = s.asDiagonal() * kernel.cov * s.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw SingularKernelError("leaf factorization failed");
  const Eigen::VectorXd resid = sy - s.cwiseProduct(f0) - eta;
  const Eigen::VectorXd u = llt.solve(resid);
  return f0 + kernel.cov * s.cwiseProduct(u);
}

Eigen::VectorXd sample_leaf_curve(const LeafSuffStats& st, double sigma2,
                                  const FactoredKernel& kernel, RngStream& rng) {
  return sample_leaf_curve(to_weighted(st, sigma2), kernel, rng);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> leaf_curve_posterior(const LeafSuffStats& st,
                                                                 const FactoredKernel& kernel) {
  const auto T = kernel.dim();
  Eigen::VectorXd s(T), sy(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    s[t] = std::sqrt(st.w[t]);
    sy[t] = st.w[t] > 0.0 ? st.wr[t] / s[t] : 0.0;
  }
  Eigen::MatrixXd B = s.asDiagonal() * kernel.cov * s.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  const Eigen::MatrixXd cs = kernel.cov * s.asDiagonal();
  Eigen::VectorXd mean = cs * llt.solve(sy);
  Eigen::MatrixXd cov = kernel.cov - cs * llt.solve(cs.transpose());
  return {mean, 0.5 * (cov + cov.transpose())};
}

CovariateIndex::CovariateIndex(const Covariates& x) {
  distinct.resize(x.n_cols);
  rank.resize(x.n_cols);
  std::vector<double> col(x.n_rows);
  for (std::size_t c = 0; c < x.n_cols; ++c) {
    for (std::size_t r = 0; r < x.n_rows; ++r) col[r] = x(r, c);
    auto& d = distinct[c];
    d = col;
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    auto& rk = rank[c];
    rk.resize(x.n_rows);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      rk[r] = static_cast<std::uint32_t>(std::lower_bound(d.begin(), d.end(), col[r]) - d.begin());
    }
  }
}

RoutedTree::RoutedTree(std::size_t leaf_dim, const TreeData& data) : tree_(leaf_dim) {
  members_.resize(1);
  members_[0].resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) members_[0][i] = i;
  splittable_.assign(1, node_splittable(members_[0], data) ? 1 : 0);
}

void RoutedTree::ensure_slots() {
  if (members_.size() < tree_.capacity()) {
    members_.resize(tree_.capacity());
    splittable_.resize(tree_.capacity(), 0);
  }
}

bool RoutedTree::node_splittable(std::span<const std::size_t> members, const TreeData& data) const {
  if (members.size() < 2) return false;
  const Covariates& x = *data.x;
  for (std::size_t v = 0; v < x.n_cols; ++v) {
    const double first = x(members[0], v);
    for (std::size_t i : members) {
      if (x(i, v) != first) return true;
    }
  }
  return false;
}

std::size_t RoutedTree::n_goodbots() const {
  std::size_t c = 0;
  for (std::size_t k = 0; k < tree_.capacity(); ++k) {
    const TreeNode& nd = tree_.node(static_cast<int>(k));
    c += nd.live && nd.is_leaf() && splittable_[k];
  }
  return c;
}

double RoutedTree::grow_probability() const {
  if (n_goodbots() == 0) return 0.0;
  return tree_.n_nogs() == 0 ? 1.0 : 0.5;
}

std::vector<std::size_t> RoutedTree::splittable_vars(int id, const TreeData& data) const {
  std::vector<std::size_t> out;
  const auto m = members(id);
  if (m.size() < 2) return out;
  const Covariates& x = *data.x;
  for (std::size_t v = 0; v < x.n_cols; ++v) {
    const double first = x(m[0], v);
    for (std::size_t i : m) {
      if (x(i, v) != first) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

DecisionRule RoutedTree::draw_rule(int id, const TreeData& data, RngStream& rng) const {
  const auto vars = splittable_vars(id, data);
  if (vars.empty()) throw std::logic_error("draw_rule on an unsplittable node");
  const Covariates& x = *data.x;
  const auto m = members(id);
  DecisionRule rule;
  rule.var = vars[rng.index(vars.size())];
  if (x.categorical(rule.var)) {
    const std::size_t L = x.n_levels(rule.var);
    std::vector<char> present(L, 0);
    for (std::size_t i : m) present[static_cast<std::size_t>(x(i, rule.var))] = 1;
    std::vector<std::size_t> levels;
    for (std::size_t k = 0; k < L; ++k) {
      if (present[k]) levels.push_back(k);
    }
    // Uniform over proper non-empty subsets of the present levels.
    std::vector<bool> left(L, false);
    for (;;) {
      std::size_t chosen = 0;
      for (std::size_t k : levels) {
        left[k] = rng.uniform() < 0.5;
        chosen += left[k];
      }
      if (chosen > 0 && chosen < levels.size()) break;
    }
    rule.left_levels = std::move(left);
    return rule;
  }
  std::vector<double> values;
  if (data.index != nullptr) {
    const auto& rk = data.index->rank[rule.var];
    const auto& dv = data.index->distinct[rule.var];
    if (m.size() * 8 < dv.size()) {
      std::vector<std::uint32_t> r;
      r.reserve(m.size());
      for (std::size_t i : m) r.push_back(rk[i]);
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      for (auto k : r) values.push_back(dv[k]);
    } else {
      std::vector<char> mark(dv.size(), 0);
      for (std::size_t i : m) mark[rk[i]] = 1;
      for (std::size_t k = 0; k < dv.size(); ++k) {
        if (mark[k]) values.push_back(dv[k]);
      }
    }
  } else {
    values.reserve(m.size());
    for (std::size_t i : m) values.push_back(x(i, rule.var));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
  }
  rule.threshold = values[rng.index(values.size() - 1)];
  return rule;
}

void RoutedTree::apply_split(int leaf, DecisionRule rule, const TreeData& data) {
  const Covariates& x = *data.x;
  const auto [l, r] = tree_.split(leaf, rule);
  ensure_slots();
  const DecisionRule& rl = tree_.node(leaf).rule;
  auto& ml = members_[static_cast<std::size_t>(l)];
  auto& mr = members_[static_cast<std::size_t>(r)];
  ml.clear();
  mr.clear();
  for (std::size_t i : members_[static_cast<std::size_t>(leaf)]) {
    (rl.goes_left(x(i, rl.var)) ? ml : mr).push_back(i);
  }
  splittable_[static_cast<std::size_t>(l)] = node_splittable(ml, data) ? 1 : 0;
  splittable_[static_cast<std::size_t>(r)] = node_splittable(mr, data) ? 1 : 0;
}

void RoutedTree::apply_collapse(int id) { tree_.collapse(id); }

namespace {

double log1m(double p) { return std::log1p(-p); }

// Log prior ratio of a split at `depth` whose children have the given splittability.
double split_log_prior(const TreePrior& prior, int depth, bool left_ok, bool right_ok) {
  const double pd = prior.split_probability(depth);
  const double pc = prior.split_probability(depth + 1);
  return std::log(pd) - log1m(pd) + (left_ok ? log1m(pc) : 0.0) + (right_ok ? log1m(pc) : 0.0);
}

}  // namespace

double RoutedTree::grow_log_ratio(int leaf, const DecisionRule& rule, const TreeData& data,
                                  const TreePrior& prior, const LeafLogLik& loglik) {
  const double goodbots_before = static_cast<double>(n_goodbots());
  const double p_grow = grow_probability();
  const std::vector<double> saved = tree_.node(leaf).curve;
  apply_split(leaf, rule, data);
  const int l = tree_.node(leaf).left;
  const int r = tree_.node(leaf).right;
  const double goodbots_after = static_cast<double>(n_goodbots());
  const double nogs_after = static_cast<double>(n_nogs());
  const double p_prune_after = goodbots_after > 0 ? 0.5 : 1.0;
  double ratio = split_log_prior(prior, tree_.node(leaf).depth, splittable(l), splittable(r));
  ratio += std::log(p_prune_after) - std::log(nogs_after) - std::log(p_grow) +
           std::log(goodbots_before);
  ratio += loglik(members(l)) + loglik(members(r)) - loglik(members(leaf));
  apply_collapse(leaf);
  tree_.node(leaf).curve = saved;
  return ratio;
}

double RoutedTree::prune_log_ratio(int id, const TreePrior& prior, const LeafLogLik& loglik) const {
  const TreeNode& nd = tree_.node(id);
  const bool sl = splittable(nd.left);
  const bool sr = splittable(nd.right);
  const double goodbots_before = static_cast<double>(n_goodbots());
  const double nogs_before = static_cast<double>(n_nogs());
  const double p_prune = goodbots_before > 0 ? 0.5 : 1.0;
  const double goodbots_after = goodbots_before - sl - sr + (splittable(id) ? 1.0 : 0.0);
  double nogs_after = nogs_before - 1.0;
  if (nd.parent >= 0) {
    const TreeNode& p = tree_.node(nd.parent);
    const int sibling = p.left == id ? p.right : p.left;
    if (tree_.node(sibling).is_leaf()) nogs_after += 1.0;
  }
  const double p_grow_after = nogs_after > 0 ? 0.5 : 1.0;
  double ratio = -split_log_prior(prior, nd.depth, sl, sr);
  ratio += std::log(p_grow_after) - std::log(goodbots_after) - std::log(p_prune) +
           std::log(nogs_before);
  ratio += loglik(members(id)) - loglik(members(nd.left)) - loglik(members(nd.right));
  return ratio;
}

MoveResult RoutedTree::propose_grow(const TreeData& data, const TreePrior& prior,
                                    const LeafLogLik& loglik, RngStream& rng) {
  MoveResult res;
  res.kind = MoveKind::kGrow;
  std::vector<int> goodbots;
  for (int leaf : tree_.leaves()) {
    if (splittable(leaf)) goodbots.push_back(leaf);
  }
  if (goodbots.empty()) return res;
  const int leaf = goodbots[rng.index(goodbots.size())];
  DecisionRule rule = draw_rule(leaf, data, rng);
  res.log_ratio = grow_log_ratio(leaf, rule, data, prior, loglik);
  if (std::log(rng.uniform()) < res.log_ratio) {
    apply_split(leaf, std::move(rule), data);
    res.accepted = true;
  }
  return res;
}

MoveResult RoutedTree::propose_prune(const TreePrior& prior, const LeafLogLik& loglik,
                                     RngStream& rng) {
  MoveResult res;
  res.kind = MoveKind::kPrune;
  const auto nogs = tree_.nogs();
  if (nogs.empty()) return res;
  const int id = nogs[rng.index(nogs.size())];
  res.log_ratio = prune_log_ratio(id, prior, loglik);
  if (std::log(rng.uniform()) < res.log_ratio) {
    apply_collapse(id);
    res.accepted = true;
  }
  return res;
}

MoveResult RoutedTree::propose(const TreeData& data, const TreePrior& prior,
                               const LeafLogLik& loglik, RngStream& rng) {
  const double u = rng.uniform();
  const double pg = grow_probability();
  if (u < pg) return propose_grow(data, prior, loglik, rng);
  if (n_nogs() > 0) return propose_prune(prior, loglik, rng);
  return {};
}

RoutedTree sample_tree_prior(const TreeData& data, const TreePrior& prior, std::size_t leaf_dim,
                             RngStream& rng) {
  RoutedTree rt(leaf_dim, data);
  std::vector<int> queue{0};
  for (std::size_t k = 0; k < queue.size(); ++k) {
    const int id = queue[k];
    if (!rt.splittable(id)) continue;
    if (rng.uniform() >= prior.split_probability(rt.tree().node(id).depth)) continue;
    DecisionRule rule = rt.draw_rule(id, data, rng);
    rt.apply_split(id, std::move(rule), data);
    queue.push_back(rt.tree().node(id).left);
    queue.push_back(rt.tree().node(id).right);
  }
  return rt;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("tree file: bad number '" + s + "'");
  }
  return v;
}

void write_subtree(std::ostream& out, const Tree& tree, int id, int parent, int& next_id) {
  const int my = next_id++;
  const TreeNode& nd = tree.node(id);
  out << my << ' ' << parent;
  if (nd.is_leaf()) {
    out << " leaf";
    for (double c : nd.curve) out << ' ' << fmt(c);
    out << '\n';
    return;
  }
  out << " split " << nd.rule.var;
  if (nd.rule.is_categorical()) {
    out << " in ";
    for (bool b : nd.rule.left_levels) out << (b ? '1' : '0');
  } else {
    out << " le " << fmt(nd.rule.threshold);
  }
  out << '\n';
  write_subtree(out, tree, nd.left, my, next_id);
  write_subtree(out, tree, nd.right, my, next_id);
}

}  // namespace

void write_tree(std::ostream& out, const Tree& tree) {
  out << "tree " << tree.n_leaves() * 2 - 1 << ' ' << tree.leaf_dim() << '\n';
  int next_id = 0;
  write_subtree(out, tree, 0, -1, next_id);
}

Tree read_tree(std::istream& in) {
  std::string word;
  std::size_t n_nodes = 0, leaf_dim = 0;
  if (!(in >> word >> n_nodes >> leaf_dim) || word != "tree") {
    throw std::runtime_error("tree file: expected 'tree <nodes> <leaf_dim>'");
  }
  Tree tree(leaf_dim);
  // Nodes are written depth-first, left before right, so file ids map onto split order.
  std::vector<int> file_to_tree(n_nodes, -1);
  std::vector<int> pending_children;
  for (std::size_t k = 0; k < n_nodes; ++k) {
    int id = 0, parent = 0;
    std::string kind;
    if (!(in >> id >> parent >> kind) || id != static_cast<int>(k)) {
      throw std::runtime_error("tree file: malformed node line");
    }
    int tree_id = 0;
    if (parent >= 0) {
      if (pending_children.empty()) throw std::runtime_error("tree file: orphan node");
      tree_id = pending_children.back();
      pending_children.pop_back();
    }
    file_to_tree[k] = tree_id;
    if (kind == "leaf") {
      auto& curve = tree.node(tree_id).curve;
      for (std::size_t t = 0; t < leaf_dim; ++t) {
        std::string v;
        in >> v;
        curve[t] = parse_double(v);
      }
    } else if (kind == "split") {
      DecisionRule rule;
      std::string op, value;
      in >> rule.var >> op >> value;
      if (op == "le") {
        rule.threshold = parse_double(value);
      } else if (op == "in") {
        for (char c : value) rule.left_levels.push_back(c == '1');
      } else {
        throw std::runtime_error("tree file: unknown rule '" + op + "'");
      }
      auto [l, r] = tree.split(tree_id, std::move(rule));
      pending_children.push_back(r);
      pending_children.push_back(l);
    } else {
      throw std::runtime_error("tree file: unknown node kind '" + kind + "'");
    }
  }
  if (!pending_children.empty()) throw std::runtime_error("tree file: truncated tree");
  return tree;
}

}  // namespace tsbcf
