#pragma once

#include <cstdint>
#include <vector>

#include "tsbcf/data.hpp"

namespace tsbcf {

/// Probit BART for P(z = 1 | x, t): one forest of constant-leaf trees.
struct PropensityOptions {
  int n_trees = 200;
  double s = 1.5;  // leaf scale; per-tree leaf sd is s / sqrt(n_trees)
  double eta = 0.95;
  double beta = 2.0;
  int n_burn = 500;
  int n_draws = 500;
  std::uint64_t seed = 1;
  std::uint64_t stream = 1000;
  double clip_lo = 0.001;
  double clip_hi = 0.999;
  bool include_target = true;
};

struct PropensityFit {
  std::vector<double> pi_hat;  // posterior mean, clipped
  int n_draws = 0;
  double clip_lo = 0.001;
  double clip_hi = 0.999;
};

/// Throws ValidationError("no overlap: ...") when only one arm is present.
PropensityFit fit_propensity(const Dataset& d, const PropensityOptions& options = {});

/// Copy of `d` with pi_hat attached.
Dataset attach_propensity(const Dataset& d, const std::vector<double>& pi_hat);

}  // namespace tsbcf
