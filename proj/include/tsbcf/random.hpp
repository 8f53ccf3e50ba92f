#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace tsbcf {

/// Seeded random stream. One stream per chain or benchmark replicate; identical
/// (seed, stream_id) pairs reproduce identical sequences.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

enum class Truncation { kAboveZero, kBelowZero };

/// Draw from N(mean, sd^2) restricted to (0, inf) or (-inf, 0).
///
/// Uses the inverse CDF of the upper tail, switching to exponential rejection
/// (Robert 1995) once the standardized bound exceeds 5, so extreme means never loop.
double sample_truncated_normal(RngStream& rng, double mean, double sd, Truncation side);

/// Standard normal restricted to (lower, inf).
double sample_standard_normal_above(RngStream& rng, double lower);

/// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
double sample_inverse_gamma(RngStream& rng, double shape, double scale);

/// mean + L * e with e standard normal; L lower triangular with positive diagonal.
Eigen::VectorXd sample_mvn_cholesky(RngStream& rng, const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& chol_lower);

/// Same map applied to a caller-supplied standard-normal vector.
Eigen::VectorXd mvn_from_standard(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                                  const Eigen::VectorXd& standard);

}  // namespace tsbcf
