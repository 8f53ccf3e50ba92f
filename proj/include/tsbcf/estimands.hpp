#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tsbcf/data.hpp"
#include "tsbcf/sampler.hpp"
#include "tsbcf/stats.hpp"

namespace tsbcf {

/// Relative risk draws with the counterfactual success probabilities behind them.
struct RRDraws {
  DrawMatrix rr, p0, p1;

  std::size_t n_draws() const { return rr.rows; }
  std::size_t n_units() const { return rr.cols; }
};

RRDraws rr_draws(const PosteriorDraws& draws);
/// RR = Phi(f1) / Phi(f0), evaluated on the log scale.
double relative_risk(double f0, double f1);

struct TargetSummary {
  std::size_t grid_index = 0;
  double t = 0.0;
  std::size_t n_units = 0;
  IntervalSummary summary;
  std::size_t excluded_draws = 0;  // non-finite draws left out (NNT only)
};

/// Per draw: mean RR over the units at each grid point; then mean and 95% interval.
/// Grid points without units are omitted and reported in `warnings`.
std::vector<TargetSummary> rr_by_target(const RRDraws& rr, std::span<const std::size_t> t_idx,
                                        const TargetGrid& grid,
                                        std::vector<std::string>* warnings = nullptr);

/// Per draw: NNT from the mean p0 and p1 over the units at each grid point.
std::vector<TargetSummary> nnt_by_target(const RRDraws& rr, std::span<const std::size_t> t_idx,
                                         const TargetGrid& grid);

inline constexpr double kNntInfinite = std::numeric_limits<double>::infinity();

/// 1 / (p0 - p1); kNntInfinite when p0 == p1.
double nnt(double p0, double p1);

struct CartOptions {
  int max_depth = 3;
  std::size_t min_leaf = 20;
};

struct CartNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  int depth = 0;
  std::size_t var = 0;
  double threshold = 0.0;
  std::vector<bool> left_levels;  // categorical split when non-empty
  std::vector<std::size_t> members;
  double mean = 0.0;
  double sse = 0.0;
  double share = 0.0;
  double mean_p0 = 0.0;
  double mean_p1 = 0.0;
  double nnt = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct CartTree {
  std::vector<CartNode> nodes;

  std::vector<int> leaves() const;
  double sse() const;
  /// Indented text rendering with split rules, mean response, share and NNT.
  std::string render(const Covariates& x) const;
};

/// Greedy recursive partitioning of `response` on `x`, exhaustive over observed
/// thresholds (categorical levels ordered by mean response). A split is kept only when
/// it lowers the SSE and leaves both children with at least min_leaf units.
CartTree fit_the_fit(std::span<const double> response, const Covariates& x,
                     const CartOptions& options = {});

/// Fills mean_p0, mean_p1 and nnt of every node from per-unit probabilities.
void annotate_cart(CartTree& tree, std::span<const double> p0, std::span<const double> p1);

/// Per draw mean over the member units.
std::vector<double> subgroup_posterior(const DrawMatrix& m, std::span<const std::size_t> members);

struct NntDifference {
  std::vector<double> draws;  // NaN where either group's NNT is infinite
  std::size_t excluded = 0;
  IntervalSummary summary;   // over the finite draws
};

NntDifference nnt_difference_distribution(const RRDraws& rr, std::span<const std::size_t> a,
                                          std::span<const std::size_t> b);

/// Per draw: (observed treated failures - expected treated failures under control)
/// scaled to 1000 treated units.
std::vector<double> treated_failure_excess(const RRDraws& rr, const Dataset& d);

struct LogisticFit {
  double intercept = 0.0;
  double slope = 0.0;
  double loglik = 0.0;
  double null_loglik = 0.0;
  int iterations = 0;
};

/// Logistic regression of y on (1, x) by Newton-Raphson (tolerance 1e-8, 100 iterations).
/// Throws std::runtime_error on non-convergence or separation.
LogisticFit logistic_regression(std::span<const double> y, std::span<const double> x);

/// McFadden pseudo-R^2 of y on the propensity score.
double targeted_selection_pseudo_r2(std::span<const double> y, std::span<const double> pi_hat);

struct GroupedTargetSummary {
  std::string group;
  TargetSummary target;
};

/// rr_by_target restricted to each labelled group of units.
std::vector<GroupedTargetSummary> grouped_rr_by_target(const RRDraws& rr,
                                                       std::span<const std::size_t> t_idx,
                                                       const TargetGrid& grid,
                                                       const std::vector<std::string>& labels);

/// Quantile band labels of a continuous column, e.g. "age:Q1".."age:Q3".
std::vector<std::string> quantile_band_labels(const Covariates& x, std::size_t col, int bands);

/// Mean absolute second difference of a sequence (0 for fewer than three values).
double mean_abs_second_difference(std::span<const double> v);

}  // namespace tsbcf
