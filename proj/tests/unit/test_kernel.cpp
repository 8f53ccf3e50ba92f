#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsbcf/kernel.hpp"

using namespace tsbcf;

TEST(Kernel, MatchesDefinitionAndFactors) {
  KernelSpec s;
  s.grid = {0.1, 0.4, 0.5, 1.0};
  s.s2 = 2.0;
  s.n_trees = 4;
  s.delta = 2.0;
  s.lengthscale = 0.3;
  auto k = build_kernel(s, 0.0);
  Eigen::MatrixXd ref = oracle::se_cov(s.grid, 0.25, 0.3);
  EXPECT_LT((k.cov - ref).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LT((k.cov * k.precision - I).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((k.chol_cov * k.chol_cov.transpose() - k.cov).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(k.logdet_precision, -std::log(ref.determinant()), 1e-8);
}

TEST(Kernel, JitterEscalatesOnNearSingularGrid) {
  KernelSpec s;
  for (int i = 0; i < 40; ++i) s.grid.push_back(i * 0.01);
  s.lengthscale = 100.0;
  auto k = build_kernel(s, 1e-8);
  EXPECT_GE(k.jitter, 1e-8);
  EXPECT_TRUE(k.precision.allFinite());
}

TEST(Kernel, RescaleMatchesRebuild) {
  KernelSpec s;
  s.grid = {0.0, 0.5, 1.0};
  s.lengthscale = 0.7;
  auto unit = build_kernel(s);
  s.delta = 3.5;
  auto direct = build_kernel(s);
  auto scaled = rescale_kernel(unit, 3.5);
  EXPECT_LT((direct.cov - scaled.cov).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((direct.precision - scaled.precision).cwiseAbs().maxCoeff() /
                direct.precision.cwiseAbs().maxCoeff(),
            1e-9);
  EXPECT_NEAR(direct.logdet_precision, scaled.logdet_precision, 1e-8);
}

TEST(Kernel, Validation) {
  KernelSpec s;
  EXPECT_THROW(build_kernel(s), ValidationError);
  s.grid = {1.0};
  s.lengthscale = 0.0;
  EXPECT_THROW(build_kernel(s), ValidationError);
}

TEST(Kernel, KappaMapping) {
  TargetGrid g({24, 28, 32, 36});
  EXPECT_DOUBLE_EQ(kappa_to_lengthscale(1.0, g), 12.0);
  EXPECT_DOUBLE_EQ(kappa_to_lengthscale(3.0, g), 4.0);
  EXPECT_DOUBLE_EQ(kappa_to_lengthscale(1.0 / 3.0, g), 36.0);
  EXPECT_DOUBLE_EQ(kappa_to_lengthscale(2.0, TargetGrid({5.0})), 1.0);
  EXPECT_THROW(kappa_to_lengthscale(0.0, g), ValidationError);
}
