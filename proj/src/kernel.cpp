#include "tsbcf/kernel.hpp"

#include <cmath>
#include <string>

namespace tsbcf {

void KernelSpec::validate() const {
  if (grid.empty()) throw ValidationError("kernel grid is empty");
  if (!(s2 > 0.0)) throw ValidationError("kernel scale s2 must be positive");
  if (n_trees < 1) throw ValidationError("kernel tree count must be at least 1");
  if (!(delta > 0.0)) throw ValidationError("kernel delta must be positive");
  if (!(lengthscale > 0.0)) throw ValidationError("kernel length-scale must be positive");
}

FactoredKernel build_kernel(const KernelSpec& spec, double jitter) {
  spec.validate();
  const auto T = static_cast<Eigen::Index>(spec.grid.size());
  const double v = spec.marginal_variance();
  Eigen::MatrixXd base(T, T);
  for (Eigen::Index a = 0; a < T; ++a) {
    for (Eigen::Index b = 0; b < T; ++b) {
      const double u = (spec.grid[a] - spec.grid[b]) / spec.lengthscale;
      base(a, b) = v * std::exp(-0.5 * u * u);
    }
  }
  double j = jitter;
  for (int attempt = 0; attempt <= 3; ++attempt, j *= 10.0) {
    Eigen::MatrixXd cov = base;
    cov.diagonal().array() += j * v;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd L = llt.matrixL();
    if ((L.diagonal().array() <= 0.0).any()) continue;
    FactoredKernel k;
    k.precision = llt.solve(Eigen::MatrixXd::Identity(T, T));
    k.precision = 0.5 * (k.precision + k.precision.transpose());
    k.chol_cov = std::move(L);
    k.logdet_precision = -2.0 * k.chol_cov.diagonal().array().log().sum();
    k.cov = std::move(cov);
    k.jitter = j;
    return k;
  }
  throw SingularKernelError("kernel factorization failed after jitter escalation to " +
                            std::to_string(j / 10.0));
}

FactoredKernel rescale_kernel(const FactoredKernel& unit, double delta) {
  if (!(delta > 0.0)) throw ValidationError("kernel delta must be positive");
  FactoredKernel k;
  k.cov = unit.cov / delta;
  k.precision = unit.precision * delta;
  k.chol_cov = unit.chol_cov / std::sqrt(delta);
  k.logdet_precision = unit.logdet_precision + static_cast<double>(unit.dim()) * std::log(delta);
  k.jitter = unit.jitter;
  return k;
}

double kappa_to_lengthscale(double kappa, const TargetGrid& grid) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  const double range = grid.range();
  if (grid.size() <= 1 || range <= 0.0) return 1.0;
  return range / kappa;
}

}  // namespace tsbcf
