#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsbcf {

/// Raised for malformed input data or configuration. The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sorted, strictly increasing set of target-covariate values.
class TargetGrid {
 public:
  TargetGrid() = default;
  explicit TargetGrid(std::vector<double> values);

  /// Grid of the unique values in `t`, sorted ascending.
  static TargetGrid from_observations(std::span<const double> t);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  const std::vector<double>& values() const { return values_; }
  double range() const { return values_.empty() ? 0.0 : values_.back() - values_.front(); }

  /// Index of `t` by exact equality, or nullopt when `t` is not a grid value.
  std::optional<std::size_t> index_of(double t) const;

 private:
  std::vector<double> values_;
};

enum class ColumnKind { kContinuous, kCategorical };

/// Row-major covariate matrix. Categorical columns hold level codes 0..k-1 stored as doubles.
struct Covariates {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  std::vector<std::vector<std::string>> levels;  // empty for continuous columns

  double operator()(std::size_t row, std::size_t col) const { return values[row * n_cols + col]; }
  const double* row(std::size_t r) const { return values.data() + r * n_cols; }
  bool categorical(std::size_t col) const { return kinds[col] == ColumnKind::kCategorical; }
  std::size_t n_levels(std::size_t col) const { return levels[col].size(); }

  /// Copy with one continuous column appended.
  Covariates with_column(std::string name, std::span<const double> column) const;
  Covariates select_rows(std::span<const std::size_t> rows) const;
  /// Copy with column `col` overwritten by `value` in every row.
  Covariates with_constant(std::size_t col, double value) const;
};

struct Dataset {
  std::vector<double> y;  // binary {0,1} unless `binary_outcome` is false
  std::vector<int> z;
  std::vector<std::size_t> t_idx;
  TargetGrid grid;
  Covariates x;
  std::optional<std::vector<double>> pi_hat;
  bool binary_outcome = true;

  std::size_t size() const { return y.size(); }
  std::vector<double> target_values() const;
  std::size_t n_treated() const;

  /// Throws ValidationError when any invariant is violated.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Maps file columns onto dataset roles.
struct DatasetSchema {
  std::string outcome = "y";
  std::string treatment = "z";
  std::string target = "t";
  std::vector<std::string> covariates;  // empty: every column without another role
  std::vector<std::string> categorical;
  std::string propensity;  // empty: none
  std::vector<double> grid;  // empty: unique observed target values
  bool continuous_outcome = false;
  char delimiter = ',';
};

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);

/// Writes columns y, z, t, covariates (categoricals as labels) and pi_hat when present.
void write_dataset(const Dataset& d, const std::filesystem::path& path, char delimiter = ',');

/// Random disjoint partition into (train, holdout) with |holdout| = m. Deterministic in `seed`.
std::pair<Dataset, Dataset> split_holdout(const Dataset& d, std::size_t m, std::uint64_t seed);

/// Row indices used by split_holdout, exposed so callers can track unit identity.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_indices(std::size_t n,
                                                                              std::size_t m,
                                                                              std::uint64_t seed);

}  // namespace tsbcf
