#include "tsbcf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_sf_erf.h>

namespace tsbcf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double log_normal_cdf(double x) {
  if (x > -5.0) return std::log(normal_cdf(x));
  // log Phi(x) = log(erfc(-x / sqrt 2) / 2), accurate far into the lower tail.
  return gsl_sf_log_erfc(-x / std::sqrt(2.0)) - std::log(2.0);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0, 1)");
  return gsl_cdf_ugaussian_Pinv(p);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double chi_square_upper(double statistic, double dof) { return gsl_cdf_chisq_Q(statistic, dof); }

double chi_square_gof_pvalue(std::span<const double> observed, std::span<const double> expected_prob) {
  if (observed.size() != expected_prob.size() || observed.size() < 2) {
    throw std::invalid_argument("chi-square: need matching bins");
  }
  const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = total * expected_prob[k];
    if (e <= 0.0) throw std::invalid_argument("chi-square: empty expected bin");
    stat += (observed[k] - e) * (observed[k] - e) / e;
  }
  return chi_square_upper(stat, static_cast<double>(observed.size() - 1));
}

IntervalSummary summarize_draws(std::vector<double> draws, double level) {
  if (draws.empty()) throw std::invalid_argument("summary of empty draws");
  IntervalSummary s;
  s.mean = mean(draws);
  std::sort(draws.begin(), draws.end());
  s.lo = quantile_sorted(draws, 0.5 * (1.0 - level));
  s.hi = quantile_sorted(draws, 1.0 - 0.5 * (1.0 - level));
  return s;
}

}  // namespace tsbcf
