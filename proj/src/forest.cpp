#include "tsbcf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tsbcf {

Forest::Forest(std::size_t n_trees, std::size_t leaf_dim, const TreeData& data)
    : leaf_dim_(leaf_dim), fit_(data.n(), 0.0) {
  if (n_trees == 0) throw std::invalid_argument("forest needs at least one tree");
  trees_.assign(n_trees, RoutedTree(leaf_dim, data));
  contrib_.resize(data.n());
  w_.resize(data.n());
  wr_.resize(data.n());
  wr2_.resize(data.n());
}

void Forest::tree_contributions(std::size_t j, const TreeData& data, std::span<double> out) const {
  const RoutedTree& rt = trees_[j];
  for (int leaf : rt.tree().leaves()) {
    const auto& curve = rt.tree().node(leaf).curve;
    for (std::size_t i : rt.members(leaf)) out[i] = curve[data.slot[i]];
  }
}

std::vector<double> Forest::partial_residuals(std::span<const double> working, std::size_t j,
                                              const TreeData& data) const {
  std::vector<double> g(data.n());
  tree_contributions(j, data, g);
  std::vector<double> out(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) out[i] = working[i] - (fit_[i] - g[i]);
  return out;
}

MoveResult Forest::update_tree(std::size_t j, const TreeData& data, std::span<const double> base,
                               std::span<const double> coef, double sigma2,
                               const FactoredKernel& kernel, const TreePrior& prior,
                               RngStream& rng) {
  const std::size_t n = data.n();
  tree_contributions(j, data, contrib_);
  const double inv_s2 = 1.0 / sigma2;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = coef[i];
    const double e = base[i] - c * (fit_[i] - contrib_[i]);
    w_[i] = c * c * inv_s2;
    wr_[i] = c * e * inv_s2;
    wr2_[i] = e * e * inv_s2;
  }
  LeafSuffStats st(leaf_dim_);
  auto fill = [&](std::span<const std::size_t> members) {
    std::fill(st.count.begin(), st.count.end(), 0.0);
    std::fill(st.w.begin(), st.w.end(), 0.0);
    std::fill(st.wr.begin(), st.wr.end(), 0.0);
    st.wr2 = 0.0;
    st.n = 0;
    for (std::size_t i : members) st.add_weighted(data.slot[i], w_[i], wr_[i], wr2_[i]);
  };
  const LeafLogLik loglik = [&](std::span<const std::size_t> members) {
    fill(members);
    return leaf_log_evidence(st, kernel);
  };
  RoutedTree& rt = trees_[j];
  MoveResult move = rt.propose(data, prior, loglik, rng);
  for (int leaf : rt.tree().leaves()) {
    const auto members = rt.members(leaf);
    fill(members);
    const Eigen::VectorXd curve = sample_leaf_curve(st, kernel, rng);
    auto& stored = rt.tree().node(leaf).curve;
    for (std::size_t t = 0; t < leaf_dim_; ++t) stored[t] = curve[static_cast<Eigen::Index>(t)];
    for (std::size_t i : members) fit_[i] += stored[data.slot[i]] - contrib_[i];
  }
  return move;
}

std::pair<double, std::size_t> Forest::leaf_quadratic_form(const Eigen::MatrixXd& precision) const {
  double ssq = 0.0;
  std::size_t n_bots = 0;
  for (const auto& rt : trees_) {
    for (int leaf : rt.tree().leaves()) {
      const auto& c = rt.tree().node(leaf).curve;
      Eigen::Map<const Eigen::VectorXd> m(c.data(), static_cast<Eigen::Index>(c.size()));
      ssq += m.dot(precision * m);
      ++n_bots;
    }
  }
  return {ssq, n_bots};
}

void Forest::draw_from_prior(const TreeData& data, const TreePrior& prior,
                             const FactoredKernel& kernel, RngStream& rng) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(kernel.dim());
  for (auto& rt : trees_) {
    rt = sample_tree_prior(data, prior, leaf_dim_, rng);
    for (int leaf : rt.tree().leaves()) {
      const Eigen::VectorXd c = sample_mvn_cholesky(rng, zero, kernel.chol_cov);
      rt.tree().node(leaf).curve.assign(c.data(), c.data() + c.size());
    }
  }
  recompute_fit(data);
}

void Forest::recompute_fit(const TreeData& data) {
  std::fill(fit_.begin(), fit_.end(), 0.0);
  for (std::size_t j = 0; j < trees_.size(); ++j) {
    tree_contributions(j, data, contrib_);
    for (std::size_t i = 0; i < fit_.size(); ++i) fit_[i] += contrib_[i];
  }
}

double Forest::cache_error(const TreeData& data) const {
  std::vector<double> total(data.n(), 0.0), g(data.n());
  for (std::size_t j = 0; j < trees_.size(); ++j) {
    tree_contributions(j, data, g);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += g[i];
  }
  double err = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i) err = std::max(err, std::abs(total[i] - fit_[i]));
  return err;
}

std::vector<double> Forest::evaluate(const Covariates& x, std::span<const std::size_t> slot) const {
  std::vector<double> out(x.n_rows, 0.0);
  for (const auto& rt : trees_) {
    for (std::size_t r = 0; r < x.n_rows; ++r) out[r] += rt.tree().evaluate(x.row(r), slot[r]);
  }
  return out;
}

void write_forest(std::ostream& out, const Forest& forest) {
  out << "forest " << forest.n_trees() << ' ' << forest.leaf_dim() << '\n';
  for (std::size_t j = 0; j < forest.n_trees(); ++j) write_tree(out, forest.tree(j).tree());
}

std::vector<Tree> read_forest(std::istream& in) {
  std::string word;
  std::size_t n = 0, dim = 0;
  if (!(in >> word >> n >> dim) || word != "forest") {
    throw std::runtime_error("forest file: expected 'forest <n_trees> <leaf_dim>'");
  }
  std::vector<Tree> trees;
  trees.reserve(n);
  for (std::size_t j = 0; j < n; ++j) trees.push_back(read_tree(in));
  return trees;
}

}  // namespace tsbcf
