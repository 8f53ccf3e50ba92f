#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsbcf/sampler.hpp"

namespace tsbcf {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Minimal CSV writer; values are written exactly as given.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Draw matrix as CSV with header u0..u{n-1}, one row per draw.
void write_draw_matrix(const std::filesystem::path& path, const DrawMatrix& m);
DrawMatrix read_draw_matrix(const std::filesystem::path& path);

/// Writes mu.csv, tau.csv, f0.csv, f1.csv, traces.csv and alpha.csv into `dir`;
/// returns the file names written.
std::vector<std::string> save_draws(const std::filesystem::path& dir, const PosteriorDraws& draws);
PosteriorDraws load_draws(const std::filesystem::path& dir);

}  // namespace tsbcf
