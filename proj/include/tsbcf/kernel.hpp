#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tsbcf/data.hpp"

namespace tsbcf {

class SingularKernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Squared-exponential covariance over the target grid:
///   C(t, t') = s2 / (n_trees * delta) * exp(-0.5 * ((t - t') / lengthscale)^2)
struct KernelSpec {
  std::vector<double> grid;
  double s2 = 1.0;
  int n_trees = 1;
  double delta = 1.0;
  double lengthscale = 1.0;
  double kappa = 1.0;

  double marginal_variance() const { return s2 / (n_trees * delta); }
  void validate() const;
};

/// Covariance, precision and Cholesky factor of a kernel on its grid.
struct FactoredKernel {
  Eigen::MatrixXd cov;        // C (including jitter)
  Eigen::MatrixXd precision;  // K = C^{-1}
  Eigen::MatrixXd chol_cov;   // lower L with L L^T = C
  double logdet_precision = 0.0;
  double jitter = 0.0;  // relative jitter actually applied

  Eigen::Index dim() const { return cov.rows(); }
};

/// Builds and factors the kernel, adding jitter * marginal variance to the diagonal.
/// Jitter escalates by x10 up to three times before SingularKernelError is thrown.
FactoredKernel build_kernel(const KernelSpec& spec, double jitter = 1e-8);

/// Kernel for `delta` given the same kernel built at delta = 1 (covariance scales by 1/delta).
FactoredKernel rescale_kernel(const FactoredKernel& unit, double delta);

/// Length-scale for smoothness kappa: grid range / kappa, so kappa in {3, 1, 1/3}
/// gives length-scales in ratio 1:3:9. A single-point grid returns 1.
double kappa_to_lengthscale(double kappa, const TargetGrid& grid);

}  // namespace tsbcf
