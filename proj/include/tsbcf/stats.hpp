#pragma once

#include <span>
#include <vector>

namespace tsbcf {

double normal_cdf(double x);
double log_normal_cdf(double x);
double normal_quantile(double p);

/// Empirical quantile with linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> values, double p);
/// Same, for data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);

double mean(std::span<const double> v);
/// Sample variance with denominator n - 1; zero for fewer than two values.
double variance(std::span<const double> v);

/// Upper tail probability of a chi-square distribution.
double chi_square_upper(double statistic, double dof);

/// Pearson chi-square p-value of observed counts against expected probabilities.
double chi_square_gof_pvalue(std::span<const double> observed, std::span<const double> expected_prob);

/// Summary of a posterior sample: mean and equal-tailed 95% interval.
struct IntervalSummary {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

IntervalSummary summarize_draws(std::vector<double> draws, double level = 0.95);

}  // namespace tsbcf
