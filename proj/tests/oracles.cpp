#include "oracles.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

double dense_leaf_loglik(const std::vector<double>& y, const std::vector<std::size_t>& slot,
                         const std::vector<double>& omega, const Eigen::MatrixXd& C) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, C.rows());
  for (Eigen::Index i = 0; i < n; ++i) W(i, static_cast<Eigen::Index>(slot[i])) = 1.0;
  Eigen::MatrixXd S = W * C * W.transpose();
  for (Eigen::Index i = 0; i < n; ++i) S(i, i) += 1.0 / omega[i];
  Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  const double logdet = std::log(std::abs(lu.determinant()));
  const double quad = yv.dot(lu.solve(yv));
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
}

double quadrature_leaf_loglik(const std::vector<double>& y, const std::vector<double>& omega, double c) {
  auto log_joint = [&](double m) {
    double s = -0.5 * std::log(2.0 * std::numbers::pi * c) - 0.5 * m * m / c;
    for (std::size_t i = 0; i < y.size(); ++i) {
      s += 0.5 * std::log(omega[i] / (2.0 * std::numbers::pi)) - 0.5 * omega[i] * (y[i] - m) * (y[i] - m);
    }
    return s;
  };
  double prec = 1.0 / c, lin = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    prec += omega[i];
    lin += omega[i] * y[i];
  }
  const double mode = lin / prec;
  const double sd = 1.0 / std::sqrt(prec);
  const double peak = log_joint(mode);
  auto f = [&](double m) { return std::exp(log_joint(m) - peak); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, mode - 40.0 * sd, mode + 40.0 * sd, 15, 1e-14);
  return peak + std::log(integral);
}

Eigen::MatrixXd se_cov(const std::vector<double>& grid, double var, double lengthscale) {
  const auto T = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd C(T, T);
  for (Eigen::Index a = 0; a < T; ++a) {
    for (Eigen::Index b = 0; b < T; ++b) {
      const double d = (grid[a] - grid[b]) / lengthscale;
      C(a, b) = var * std::exp(-0.5 * d * d);
    }
  }
  return C;
}

std::vector<double> max_depth_pmf(double eta, double beta, int max_bin) {
  auto p = [&](int d) { return eta * std::pow(1.0 + d, -beta); };
  // G(d, D): probability that a subtree rooted at depth d reaches no deeper than D.
  auto cdf = [&](int D) {
    double g = 1.0 - p(D);
    for (int d = D - 1; d >= 0; --d) g = (1.0 - p(d)) + p(d) * g * g;
    return g;
  };
  std::vector<double> pmf;
  double prev = 0.0;
  for (int D = 0; D < max_bin; ++D) {
    const double c = cdf(D);
    pmf.push_back(c - prev);
    prev = c;
  }
  pmf.push_back(1.0 - prev);
  return pmf;
}

double chi_square_pvalue(const std::vector<double>& observed, const std::vector<double>& prob) {
  double total = 0.0;
  for (double o : observed) total += o;
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = total * prob[k];
    stat += (observed[k] - e) * (observed[k] - e) / e;
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m4 = 0.0;
  for (double x : v) {
    const double d = x - m.mean;
    m.var += d * d;
    m4 += d * d * d * d;
  }
  m.var /= n - 1.0;
  m4 /= n;
  m.se_mean = std::sqrt(m.var / n);
  m.se_var = std::sqrt(std::max(0.0, (m4 - m.var * m.var * (n - 3.0) / (n - 1.0)) / n));
  return m;
}

Irls irls(const std::vector<double>& y, const std::vector<double>& x) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[static_cast<std::size_t>(i)];
    Y[i] = y[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(2);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd eta = X * beta;
    const Eigen::VectorXd p = (1.0 + (-eta.array()).exp()).inverse().matrix();
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::VectorXd zw = eta + ((Y - p).array() / w.array()).matrix();
    const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
    const Eigen::VectorXd next = (XtW * X).ldlt().solve(XtW * zw);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < 1e-12) break;
  }
  Irls out{beta[0], beta[1], 0.0, 0.0};
  const double ybar = Y.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(X.row(i) * beta)(0)));
    out.loglik += Y[i] * std::log(p) + (1.0 - Y[i]) * std::log(1.0 - p);
    out.null_loglik += Y[i] * std::log(ybar) + (1.0 - Y[i]) * std::log(1.0 - ybar);
  }
  return out;
}

tsbcf::Covariates continuous(const std::vector<std::vector<double>>& columns) {
  tsbcf::Covariates x;
  x.n_cols = columns.size();
  x.n_rows = columns.empty() ? 0 : columns[0].size();
  x.values.resize(x.n_rows * x.n_cols);
  for (std::size_t c = 0; c < x.n_cols; ++c) {
    x.names.push_back("x" + std::to_string(c + 1));
    x.kinds.push_back(tsbcf::ColumnKind::kContinuous);
    x.levels.emplace_back();
    for (std::size_t r = 0; r < x.n_rows; ++r) x.values[r * x.n_cols + c] = columns[c][r];
  }
  return x;
}

tsbcf::Dataset random_dataset(std::size_t n, std::size_t p, const std::vector<double>& grid,
                              tsbcf::RngStream& rng) {
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (auto& c : cols) {
    for (double& v : c) v = rng.normal();
  }
  tsbcf::Dataset d;
  d.grid = tsbcf::TargetGrid(grid);
  d.x = continuous(cols);
  for (std::size_t i = 0; i < n; ++i) {
    d.t_idx.push_back(rng.index(grid.size()));
    d.z.push_back(i % 2 == 0 ? 1 : 0);
    d.y.push_back(rng.bernoulli(0.6) ? 1.0 : 0.0);
  }
  d.pi_hat = std::vector<double>(n, 0.5);
  return d;
}

}  // namespace oracle
