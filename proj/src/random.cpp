#include "tsbcf/random.hpp"

#include <cmath>
#include <stdexcept>

#include "tsbcf/stats.hpp"

namespace tsbcf {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x74736263u};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(seeded_engine(seed, stream_id)) {}

double RngStream::uniform() {
  // 53 random bits mapped to the open interval (0, 1).
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("gamma: non-positive parameter");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

double sample_standard_normal_above(RngStream& rng, double a) {
  if (a > 5.0) {
    // Robert (1995): exponential proposal with the optimal rate.
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      double z = a - std::log(rng.uniform()) / lambda;
      double d = z - lambda;
      if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
    }
  }
  // Inverse CDF on the upper tail: Z = -Phi^-1(u * Phi(-a)).
  const double tail = normal_cdf(-a);
  double z = -normal_quantile(rng.uniform() * tail);
  return z > a ? z : std::nextafter(a, INFINITY);
}

double sample_truncated_normal(RngStream& rng, double mean, double sd, Truncation side) {
  if (!std::isfinite(mean) || !std::isfinite(sd)) {
    throw std::invalid_argument("truncated normal: non-finite parameter");
  }
  if (!(sd > 0.0)) throw std::invalid_argument("truncated normal: sd must be positive");
  if (side == Truncation::kAboveZero) {
    double v = mean + sd * sample_standard_normal_above(rng, -mean / sd);
    return v > 0.0 ? v : std::nextafter(0.0, 1.0);
  }
  double v = mean - sd * sample_standard_normal_above(rng, mean / sd);
  return v < 0.0 ? v : std::nextafter(0.0, -1.0);
}

double sample_inverse_gamma(RngStream& rng, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw std::invalid_argument("inverse gamma: shape and scale must be positive");
  }
  return 1.0 / rng.gamma(shape, scale);
}

Eigen::VectorXd mvn_from_standard(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                                  const Eigen::VectorXd& standard) {
  if (chol_lower.rows() != chol_lower.cols() || chol_lower.rows() != mean.size() ||
      standard.size() != mean.size()) {
    throw std::invalid_argument("mvn: dimension mismatch");
  }
  for (Eigen::Index k = 0; k < chol_lower.rows(); ++k) {
    if (!(chol_lower(k, k) > 0.0)) {
      throw std::invalid_argument("mvn: Cholesky factor needs a positive diagonal");
    }
  }
  return mean + chol_lower.triangularView<Eigen::Lower>() * standard;
}

Eigen::VectorXd sample_mvn_cholesky(RngStream& rng, const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& chol_lower) {
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) e[k] = rng.normal();
  return mvn_from_standard(mean, chol_lower, e);
}

}  // namespace tsbcf
