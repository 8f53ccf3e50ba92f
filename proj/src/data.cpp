#include "tsbcf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace tsbcf {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    auto b = s.find_first_not_of(" \t\"");
    auto e = s.find_last_not_of(" \t\"");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& s, const std::string& column, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ValidationError("unparseable numeric value '" + s + "' in column '" + column +
                          "' at line " + std::to_string(line));
  }
  return v;
}

std::string format_value(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

TargetGrid::TargetGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("target grid is empty");
  for (std::size_t k = 1; k < values_.size(); ++k) {
    if (!(values_[k] > values_[k - 1])) {
      throw ValidationError("target grid must be strictly increasing");
    }
  }
}

TargetGrid TargetGrid::from_observations(std::span<const double> t) {
  std::vector<double> v(t.begin(), t.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return TargetGrid(std::move(v));
}

std::optional<std::size_t> TargetGrid::index_of(double t) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), t);
  if (it == values_.end() || *it != t) return std::nullopt;
  return static_cast<std::size_t>(it - values_.begin());
}

Covariates Covariates::with_column(std::string name, std::span<const double> column) const {
  if (column.size() != n_rows) throw ValidationError("column length mismatch");
  Covariates out;
  out.n_rows = n_rows;
  out.n_cols = n_cols + 1;
  out.values.resize(out.n_rows * out.n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::copy(row(r), row(r) + n_cols, out.values.begin() + r * out.n_cols);
    out.values[r * out.n_cols + n_cols] = column[r];
  }
  out.names = names;
  out.names.push_back(std::move(name));
  out.kinds = kinds;
  out.kinds.push_back(ColumnKind::kContinuous);
  out.levels = levels;
  out.levels.emplace_back();
  return out;
}

Covariates Covariates::select_rows(std::span<const std::size_t> rows) const {
  Covariates out = *this;
  out.n_rows = rows.size();
  out.values.assign(rows.size() * n_cols, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(row(rows[r]), row(rows[r]) + n_cols, out.values.begin() + r * n_cols);
  }
  return out;
}

Covariates Covariates::with_constant(std::size_t col, double value) const {
  Covariates out = *this;
  for (std::size_t r = 0; r < n_rows; ++r) out.values[r * n_cols + col] = value;
  return out;
}

std::vector<double> Dataset::target_values() const {
  std::vector<double> t(size());
  for (std::size_t i = 0; i < size(); ++i) t[i] = grid[t_idx[i]];
  return t;
}

std::size_t Dataset::n_treated() const {
  return static_cast<std::size_t>(std::count(z.begin(), z.end(), 1));
}

void Dataset::validate() const {
  const std::size_t n = y.size();
  if (n == 0) throw ValidationError("dataset is empty");
  if (z.size() != n || t_idx.size() != n || x.n_rows != n) {
    throw ValidationError("dataset columns have different lengths");
  }
  if (x.values.size() != x.n_rows * x.n_cols || x.names.size() != x.n_cols ||
      x.kinds.size() != x.n_cols || x.levels.size() != x.n_cols) {
    throw ValidationError("covariate matrix is inconsistent");
  }
  if (grid.size() == 0) throw ValidationError("target grid is empty");
  for (std::size_t i = 0; i < n; ++i) {
    if (binary_outcome && y[i] != 0.0 && y[i] != 1.0) throw ValidationError("non-binary outcome");
    if (!std::isfinite(y[i])) throw ValidationError("non-finite outcome");
    if (z[i] != 0 && z[i] != 1) throw ValidationError("non-binary treatment");
    if (t_idx[i] >= grid.size()) throw ValidationError("target index outside the grid");
  }
  for (std::size_t c = 0; c < x.n_cols; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      double v = x(r, c);
      if (!std::isfinite(v)) throw ValidationError("non-finite covariate in column " + x.names[c]);
      if (x.categorical(c) && (v < 0 || v >= static_cast<double>(x.n_levels(c)) || v != std::floor(v))) {
        throw ValidationError("invalid level code in column " + x.names[c]);
      }
    }
  }
  if (pi_hat) {
    if (pi_hat->size() != n) throw ValidationError("propensity length mismatch");
    for (double p : *pi_hat) {
      if (!(p > 0.0 && p < 1.0)) throw ValidationError("propensity outside (0, 1)");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.grid = grid;
  out.binary_outcome = binary_outcome;
  out.x = x.select_rows(rows);
  out.y.reserve(rows.size());
  out.z.reserve(rows.size());
  out.t_idx.reserve(rows.size());
  for (std::size_t r : rows) {
    out.y.push_back(y[r]);
    out.z.push_back(z[r]);
    out.t_idx.push_back(t_idx[r]);
  }
  if (pi_hat) {
    std::vector<double> p;
    p.reserve(rows.size());
    for (std::size_t r : rows) p.push_back((*pi_hat)[r]);
    out.pi_hat = std::move(p);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw ValidationError("empty file: " + path.string());
  }
  const auto header = split_line(line, schema.delimiter);
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  auto require = [&](const std::string& name, const char* role) {
    auto c = find(name);
    if (!c) throw ValidationError(std::string("missing column '") + name + "' (" + role + ")");
    return *c;
  };
  const std::size_t cy = require(schema.outcome, "outcome");
  const std::size_t cz = require(schema.treatment, "treatment");
  const std::size_t ct = require(schema.target, "target");
  std::optional<std::size_t> cp;
  if (!schema.propensity.empty()) cp = require(schema.propensity, "propensity");

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == cy || c == cz || c == ct || (cp && c == *cp)) continue;
      cov_names.push_back(header[c]);
    }
  }
  std::vector<std::size_t> cov_cols;
  for (const auto& name : cov_names) cov_cols.push_back(require(name, "covariate"));
  std::set<std::string> categorical(schema.categorical.begin(), schema.categorical.end());
  for (const auto& name : schema.categorical) {
    if (std::find(cov_names.begin(), cov_names.end(), name) == cov_names.end()) {
      throw ValidationError("categorical column '" + name + "' is not a covariate");
    }
  }

  Dataset d;
  d.binary_outcome = !schema.continuous_outcome;
  d.x.n_cols = cov_cols.size();
  d.x.names = cov_names;
  d.x.levels.assign(cov_cols.size(), {});
  for (const auto& name : cov_names) {
    d.x.kinds.push_back(categorical.count(name) ? ColumnKind::kCategorical
                                                : ColumnKind::kContinuous);
  }
  std::vector<std::map<std::string, std::size_t>> level_codes(cov_cols.size());
  std::vector<double> t_values;
  std::vector<double> pi;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
    }
    double yv = parse_number(fields[cy], schema.outcome, line_no);
    if (d.binary_outcome && yv != 0.0 && yv != 1.0) {
      throw ValidationError("non-binary outcome at line " + std::to_string(line_no));
    }
    double zv = parse_number(fields[cz], schema.treatment, line_no);
    if (zv != 0.0 && zv != 1.0) {
      throw ValidationError("non-binary treatment at line " + std::to_string(line_no));
    }
    d.y.push_back(yv);
    d.z.push_back(static_cast<int>(zv));
    t_values.push_back(parse_number(fields[ct], schema.target, line_no));
    if (cp) pi.push_back(parse_number(fields[*cp], schema.propensity, line_no));
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      const std::string& s = fields[cov_cols[k]];
      if (d.x.kinds[k] == ColumnKind::kCategorical) {
        if (s.empty()) throw ValidationError("missing value in column '" + cov_names[k] + "'");
        auto [it, inserted] = level_codes[k].emplace(s, d.x.levels[k].size());
        if (inserted) d.x.levels[k].push_back(s);
        d.x.values.push_back(static_cast<double>(it->second));
      } else {
        d.x.values.push_back(parse_number(s, cov_names[k], line_no));
      }
    }
  }
  if (d.y.empty()) throw ValidationError("empty file: " + path.string());
  d.x.n_rows = d.y.size();

  d.grid = schema.grid.empty() ? TargetGrid::from_observations(t_values) : TargetGrid(schema.grid);
  d.t_idx.reserve(t_values.size());
  for (std::size_t i = 0; i < t_values.size(); ++i) {
    auto k = d.grid.index_of(t_values[i]);
    if (!k) {
      throw ValidationError("target value " + format_value(t_values[i]) + " at row " +
                            std::to_string(i + 1) + " is not on the grid");
    }
    d.t_idx.push_back(*k);
  }
  if (cp) d.pi_hat = std::move(pi);
  d.validate();
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "y" << delimiter << "z" << delimiter << "t";
  for (const auto& name : d.x.names) out << delimiter << name;
  if (d.pi_hat) out << delimiter << "pi_hat";
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << format_value(d.y[i]) << delimiter << d.z[i] << delimiter << format_value(d.grid[d.t_idx[i]]);
    for (std::size_t c = 0; c < d.x.n_cols; ++c) {
      out << delimiter;
      if (d.x.categorical(c)) {
        out << d.x.levels[c][static_cast<std::size_t>(d.x(i, c))];
      } else {
        out << format_value(d.x(i, c));
      }
    }
    if (d.pi_hat) out << delimiter << format_value((*d.pi_hat)[i]);
    out << '\n';
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_indices(std::size_t n,
                                                                              std::size_t m,
                                                                              std::uint64_t seed) {
  if (m == 0 || m >= n) {
    throw ValidationError("holdout size must satisfy 0 < m < n (m=" + std::to_string(m) +
                          ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 engine(seed);
  // Fisher-Yates with our own index draws keeps the partition identical across standard libraries.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(engine() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> holdout(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(m), perm.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
  return {train, holdout};
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& d, std::size_t m, std::uint64_t seed) {
  auto [train, holdout] = holdout_indices(d.size(), m, seed);
  return {d.subset(train), d.subset(holdout)};
}

}  // namespace tsbcf
