#include "tsbcf/draws_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tsbcf {

namespace {

double parse(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s == "nan") return NAN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw std::runtime_error("missing column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file " + path.string());
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
  }
  return t;
}

void write_draw_matrix(const std::filesystem::path& path, const DrawMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < m.cols; ++c) out << (c ? ",u" : "u") << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

DrawMatrix read_draw_matrix(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  DrawMatrix m;
  m.cols = t.header.size();
  for (const auto& row : t.rows) {
    std::vector<double> v;
    v.reserve(row.size());
    for (const auto& s : row) v.push_back(parse(s));
    m.append_row(v);
  }
  return m;
}

std::vector<std::string> save_draws(const std::filesystem::path& dir, const PosteriorDraws& d) {
  std::filesystem::create_directories(dir);
  write_draw_matrix(dir / "mu.csv", d.mu);
  write_draw_matrix(dir / "tau.csv", d.tau);
  write_draw_matrix(dir / "f0.csv", d.f0);
  write_draw_matrix(dir / "f1.csv", d.f1);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < d.n_draws(); ++r) {
    rows.push_back({std::to_string(r), std::to_string(d.chain[r]), format_double(d.xi[r]),
                    format_double(d.b0[r]), format_double(d.b1[r]), format_double(d.delta_mu[r]),
                    format_double(d.delta_tau[r]), format_double(d.sigma2[r])});
  }
  write_csv(dir / "traces.csv",
            {"draw", "chain", "xi", "b0", "b1", "delta_mu", "delta_tau", "sigma2"}, rows);
  rows.clear();
  for (std::size_t k = 0; k < d.alpha.size(); ++k) {
    rows.push_back({std::to_string(k), format_double(d.alpha[k])});
  }
  write_csv(dir / "alpha.csv", {"grid_index", "alpha"}, rows);
  rows.clear();
  for (std::size_t i = 0; i < d.t_idx.size(); ++i) {
    rows.push_back({std::to_string(i), std::to_string(d.t_idx[i])});
  }
  write_csv(dir / "t_idx.csv", {"unit", "grid_index"}, rows);
  return {"mu.csv", "tau.csv", "f0.csv", "f1.csv", "traces.csv", "alpha.csv", "t_idx.csv"};
}

PosteriorDraws load_draws(const std::filesystem::path& dir) {
  PosteriorDraws d;
  d.mu = read_draw_matrix(dir / "mu.csv");
  d.tau = read_draw_matrix(dir / "tau.csv");
  d.f0 = read_draw_matrix(dir / "f0.csv");
  d.f1 = read_draw_matrix(dir / "f1.csv");
  const CsvTable tr = read_csv(dir / "traces.csv");
  const std::size_t c_chain = tr.column("chain"), c_xi = tr.column("xi"), c_b0 = tr.column("b0"),
                    c_b1 = tr.column("b1"), c_dm = tr.column("delta_mu"),
                    c_dt = tr.column("delta_tau"), c_s2 = tr.column("sigma2");
  for (const auto& row : tr.rows) {
    d.chain.push_back(static_cast<int>(parse(row[c_chain])));
    d.xi.push_back(parse(row[c_xi]));
    d.b0.push_back(parse(row[c_b0]));
    d.b1.push_back(parse(row[c_b1]));
    d.delta_mu.push_back(parse(row[c_dm]));
    d.delta_tau.push_back(parse(row[c_dt]));
    d.sigma2.push_back(parse(row[c_s2]));
  }
  for (const auto& row : read_csv(dir / "alpha.csv").rows) d.alpha.push_back(parse(row.at(1)));
  for (const auto& row : read_csv(dir / "t_idx.csv").rows) {
    d.t_idx.push_back(static_cast<std::size_t>(parse(row.at(1))));
  }
  if (d.mu.rows != d.xi.size() || d.f0.rows != d.mu.rows || d.f1.rows != d.mu.rows ||
      d.tau.rows != d.mu.rows || d.t_idx.size() != d.mu.cols) {
    throw std::runtime_error("draw files in " + dir.string() + " are inconsistent");
  }
  return d;
}

}  // namespace tsbcf
