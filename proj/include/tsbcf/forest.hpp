#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "tsbcf/kernel.hpp"
#include "tsbcf/random.hpp"
#include "tsbcf/tree.hpp"

namespace tsbcf {

/// Ordered sum of routed trees with a cached per-observation fit.
///
/// Trees model data through `base_i ~ N(coef_i * g(x_i, t_i), sigma2)`, which covers both
/// the prognostic forest (coef = xi) and the treatment forest (coef = b_z).
class Forest {
 public:
  Forest(std::size_t n_trees, std::size_t leaf_dim, const TreeData& data);

  std::size_t n_trees() const { return trees_.size(); }
  std::size_t leaf_dim() const { return leaf_dim_; }
  const RoutedTree& tree(std::size_t j) const { return trees_[j]; }
  RoutedTree& tree(std::size_t j) { return trees_[j]; }

  /// Cached sum over trees, per observation.
  std::span<const double> fit() const { return fit_; }

  /// g_j(x_i, t_i) for every observation.
  void tree_contributions(std::size_t j, const TreeData& data, std::span<double> out) const;

  /// working - (fit - g_j), the residual seen by tree j.
  std::vector<double> partial_residuals(std::span<const double> working, std::size_t j,
                                        const TreeData& data) const;

  /// One backfitting step for tree j: grow/prune Metropolis with the leaf curves
  /// integrated out, then fresh leaf-curve draws. Updates the fit cache.
  MoveResult update_tree(std::size_t j, const TreeData& data, std::span<const double> base,
                         std::span<const double> coef, double sigma2, const FactoredKernel& kernel,
                         const TreePrior& prior, RngStream& rng);

  /// Sum over leaves of m' precision m and the number of leaves.
  std::pair<double, std::size_t> leaf_quadratic_form(const Eigen::MatrixXd& precision) const;

  /// Replaces every tree by a draw from the tree prior with N(0, C) leaf curves.
  void draw_from_prior(const TreeData& data, const TreePrior& prior, const FactoredKernel& kernel,
                       RngStream& rng);

  void recompute_fit(const TreeData& data);
  /// Largest absolute gap between the cache and a fresh sum over trees.
  double cache_error(const TreeData& data) const;

  /// Forest value at new rows (routed from scratch).
  std::vector<double> evaluate(const Covariates& x, std::span<const std::size_t> slot) const;

 private:
  std::vector<RoutedTree> trees_;
  std::size_t leaf_dim_;
  std::vector<double> fit_;
  // Per-observation workspaces reused across tree updates.
  std::vector<double> contrib_, w_, wr_, wr2_;
};

/// Forest persistence: "forest <n_trees> <leaf_dim>" followed by each tree's node list.
void write_forest(std::ostream& out, const Forest& forest);
std::vector<Tree> read_forest(std::istream& in);

}  // namespace tsbcf
