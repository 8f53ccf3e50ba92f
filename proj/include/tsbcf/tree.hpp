#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsbcf/data.hpp"
#include "tsbcf/kernel.hpp"
#include "tsbcf/random.hpp"

namespace tsbcf {

/// Continuous rules send x <= threshold left; categorical rules send codes in
/// `left_levels` left.
struct DecisionRule {
  std::size_t var = 0;
  double threshold = 0.0;
  std::vector<bool> left_levels;  // non-empty exactly for categorical rules

  bool is_categorical() const { return !left_levels.empty(); }
  bool goes_left(double value) const;
};

struct TreeNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  int depth = 0;
  bool live = true;
  DecisionRule rule;
  std::vector<double> curve;  // leaf curve over the grid slots

  bool is_leaf() const { return left < 0; }
};

/// Binary tree with curve-valued leaves. Node 0 is the root; node ids are stable
/// and freed ids are reused.
class Tree {
 public:
  explicit Tree(std::size_t leaf_dim = 1);

  std::size_t leaf_dim() const { return leaf_dim_; }
  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t capacity() const { return nodes_.size(); }

  std::vector<int> leaves() const;
  /// Internal nodes whose two children are leaves (prunable nodes).
  std::vector<int> nogs() const;
  bool is_nog(int id) const;
  std::size_t n_leaves() const;
  std::size_t n_nogs() const;
  int max_depth() const;

  /// Turns a leaf into an internal node; returns (left, right) with zero curves.
  std::pair<int, int> split(int leaf, DecisionRule rule);
  /// Removes the two leaf children of a nog node, which becomes a leaf again. Its curve is
  /// whatever it held before the split; callers redraw curves after accepted moves.
  void collapse(int id);

  int find_leaf(const double* row) const;
  double evaluate(const double* row, std::size_t slot) const {
    return node(find_leaf(row)).curve[slot];
  }

  bool operator==(const Tree& other) const;

 private:
  int allocate();

  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
  std::size_t leaf_dim_;
};

/// Node-level split probability eta * (1 + depth)^(-beta).
struct TreePrior {
  double eta = 0.95;
  double beta = 2.0;

  double split_probability(int depth) const;
};

/// Per-slot sufficient statistics of the observations in one leaf.
///
/// With unit weights `w` counts observations and `wr`, `wr2` are plain sums;
/// with precision weights they are sums of omega, omega*r and omega*r^2.
struct LeafSuffStats {
  std::vector<double> count;
  std::vector<double> w;
  std::vector<double> wr;
  double wr2 = 0.0;
  double log_w = 0.0;
  std::size_t n = 0;

  explicit LeafSuffStats(std::size_t dim = 1) : count(dim, 0.0), w(dim, 0.0), wr(dim, 0.0) {}

  std::size_t dim() const { return w.size(); }
  void add(std::size_t slot, double r, double weight = 1.0);
  /// Adds precomputed omega, omega*r, omega*r^2 (log omega is not tracked).
  void add_weighted(std::size_t slot, double weight, double weighted_r, double weighted_r2);
};

/// Log marginal likelihood of a leaf with N(0, K^{-1}) curve prior and noise variance sigma2.
/// `stats` must hold unit-weight sums.
double marginal_loglik_homoskedastic(const LeafSuffStats& stats, double sigma2,
                                     const FactoredKernel& kernel);

/// Log marginal likelihood with per-observation precisions; `stats` holds weighted sums
/// including log_w = sum of log omega.
double marginal_loglik_heteroskedastic(const LeafSuffStats& stats, const FactoredKernel& kernel);

/// The data-dependent part of the marginal likelihood,
///   0.5 * (log|K| - log|C|) - 0.5 * (y' Lambda y - b' C^{-1} b),
/// i.e. the full value without -n/2 log(2 pi) + 0.5 log|Lambda|. Those terms cancel in
/// grow/prune ratios, so tree moves use this form.
double leaf_log_evidence(const LeafSuffStats& weighted, const FactoredKernel& kernel);

/// Posterior draw N(C^{-1} b, C^{-1}) of a leaf curve from weighted statistics.
Eigen::VectorXd sample_leaf_curve(const LeafSuffStats& weighted, const FactoredKernel& kernel,
                                  RngStream& rng);
/// Homoskedastic overload: unit-weight statistics and noise variance sigma2.
Eigen::VectorXd sample_leaf_curve(const LeafSuffStats& stats, double sigma2,
                                  const FactoredKernel& kernel, RngStream& rng);

/// Posterior mean and covariance of a leaf curve (used by tests and diagnostics).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> leaf_curve_posterior(const LeafSuffStats& weighted,
                                                                 const FactoredKernel& kernel);

/// Per-column sorted distinct values and each row's rank among them.
struct CovariateIndex {
  std::vector<std::vector<double>> distinct;
  std::vector<std::vector<std::uint32_t>> rank;

  CovariateIndex() = default;
  explicit CovariateIndex(const Covariates& x);
};

/// Covariates and grid slot per observation seen by one forest.
struct TreeData {
  const Covariates* x = nullptr;
  std::span<const std::size_t> slot;
  const CovariateIndex* index = nullptr;  // optional; speeds up threshold draws

  std::size_t n() const { return slot.size(); }
};

/// Log-likelihood of a candidate leaf given its member observations.
using LeafLogLik = std::function<double(std::span<const std::size_t>)>;

enum class MoveKind { kNone, kGrow, kPrune };

struct MoveResult {
  MoveKind kind = MoveKind::kNone;
  bool accepted = false;
  double log_ratio = -std::numeric_limits<double>::infinity();
};

/// A tree together with the observations routed to each of its nodes.
class RoutedTree {
 public:
  RoutedTree(std::size_t leaf_dim, const TreeData& data);

  const Tree& tree() const { return tree_; }
  Tree& tree() { return tree_; }
  std::span<const std::size_t> members(int id) const {
    return members_[static_cast<std::size_t>(id)];
  }
  bool splittable(int id) const { return splittable_[static_cast<std::size_t>(id)] != 0; }
  std::size_t n_goodbots() const;
  std::size_t n_nogs() const { return tree_.n_nogs(); }

  /// Probability of proposing grow from the current tree: 0 without splittable leaves,
  /// 1 for a root-only tree, 0.5 otherwise.
  double grow_probability() const;

  std::vector<std::size_t> splittable_vars(int id, const TreeData& data) const;
  /// Uniform variable among the splittable ones, then a uniform threshold among the
  /// distinct observed values (all but the largest) or a uniform proper level subset.
  DecisionRule draw_rule(int id, const TreeData& data, RngStream& rng) const;

  /// Metropolis log acceptance ratio for growing `leaf` with `rule`; the tree is unchanged.
  double grow_log_ratio(int leaf, const DecisionRule& rule, const TreeData& data,
                        const TreePrior& prior, const LeafLogLik& loglik);
  /// Metropolis log acceptance ratio for pruning the nog node `id`.
  double prune_log_ratio(int id, const TreePrior& prior, const LeafLogLik& loglik) const;

  MoveResult propose_grow(const TreeData& data, const TreePrior& prior, const LeafLogLik& loglik,
                          RngStream& rng);
  MoveResult propose_prune(const TreePrior& prior, const LeafLogLik& loglik, RngStream& rng);
  /// Grow with grow_probability(), otherwise prune.
  MoveResult propose(const TreeData& data, const TreePrior& prior, const LeafLogLik& loglik,
                     RngStream& rng);

  void apply_split(int leaf, DecisionRule rule, const TreeData& data);
  void apply_collapse(int id);

 private:
  bool node_splittable(std::span<const std::size_t> members, const TreeData& data) const;
  void ensure_slots();

  Tree tree_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<char> splittable_;
};

/// Forward simulation of the tree prior with the same rule distribution the sampler uses.
RoutedTree sample_tree_prior(const TreeData& data, const TreePrior& prior, std::size_t leaf_dim,
                             RngStream& rng);

void write_tree(std::ostream& out, const Tree& tree);
Tree read_tree(std::istream& in);

}  // namespace tsbcf
