#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "tsbcf/data.hpp"
#include "tsbcf/draws_io.hpp"

namespace fs = std::filesystem;
using namespace tsbcf;

namespace {

fs::path write_file(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / ("tsbcf_data_" + name);
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(TargetGrid, RejectsUnsortedAndEmpty) {
  EXPECT_THROW(TargetGrid(std::vector<double>{}), ValidationError);
  EXPECT_THROW(TargetGrid({1.0, 1.0}), ValidationError);
  EXPECT_THROW(TargetGrid({2.0, 1.0}), ValidationError);
  TargetGrid g({0.1, 0.5, 0.9});
  EXPECT_EQ(g.index_of(0.5), 1u);
  EXPECT_FALSE(g.index_of(0.6).has_value());
  EXPECT_DOUBLE_EQ(g.range(), 0.8);
}

TEST(TargetGrid, FromObservationsIsSortedUnique) {
  std::vector<double> t{3, 1, 2, 3, 1};
  auto g = TargetGrid::from_observations(t);
  EXPECT_EQ(g.values(), (std::vector<double>{1, 2, 3}));
}

TEST(LoadDataset, ReadsRolesAndCategoricals) {
  auto p = write_file("ok.csv", "y,z,t,age,site\n1,0,34,1.5,a\n0,1,35,2.5,b\n1,1,34,0.5,a\n");
  DatasetSchema s;
  s.categorical = {"site"};
  Dataset d = load_dataset(p, s);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.grid.values(), (std::vector<double>{34, 35}));
  EXPECT_EQ(d.t_idx, (std::vector<std::size_t>{0, 1, 0}));
  EXPECT_EQ(d.x.n_cols, 2u);
  EXPECT_TRUE(d.x.categorical(1));
  EXPECT_EQ(d.x.levels[1], (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(d.x(1, 1), 1.0);
  EXPECT_EQ(d.n_treated(), 2u);
}

TEST(LoadDataset, ValidationErrors) {
  DatasetSchema s;
  EXPECT_THROW(load_dataset(write_file("empty.csv", ""), s), ValidationError);
  EXPECT_THROW(load_dataset(write_file("noz.csv", "y,t,x\n1,1,2\n"), s), ValidationError);
  EXPECT_THROW(load_dataset(write_file("nonbin.csv", "y,z,t,x\n2,0,1,2\n"), s), ValidationError);
  EXPECT_THROW(load_dataset(write_file("ragged.csv", "y,z,t,x\n1,0,1\n"), s), ValidationError);
  EXPECT_THROW(load_dataset(write_file("nan.csv", "y,z,t,x\n1,0,1,abc\n"), s), ValidationError);
  DatasetSchema g;
  g.grid = {1.0, 2.0};
  EXPECT_THROW(load_dataset(write_file("offgrid.csv", "y,z,t,x\n1,0,3,1\n"), g), ValidationError);
  DatasetSchema pp;
  pp.propensity = "p";
  EXPECT_THROW(load_dataset(write_file("pi.csv", "y,z,t,x,p\n1,0,1,1,1.0\n"), pp), ValidationError);
}

TEST(LoadDataset, ContinuousOutcomeAllowed) {
  DatasetSchema s;
  s.continuous_outcome = true;
  Dataset d = load_dataset(write_file("cont.csv", "y,z,t,x\n2.5,0,1,1\n-1,1,2,0\n"), s);
  EXPECT_FALSE(d.binary_outcome);
  EXPECT_DOUBLE_EQ(d.y[0], 2.5);
}

TEST(WriteDataset, RoundTrip) {
  auto p = write_file("rt_in.csv", "y,z,t,w,g,pi\n1,0,1,0.25,u,0.3\n0,1,2,1e-3,v,0.6\n");
  DatasetSchema s;
  s.categorical = {"g"};
  s.propensity = "pi";
  Dataset d = load_dataset(p, s);
  fs::path out = fs::temp_directory_path() / "tsbcf_data_rt_out.csv";
  write_dataset(d, out);
  DatasetSchema s2;
  s2.categorical = {"g"};
  s2.propensity = "pi_hat";
  Dataset e = load_dataset(out, s2);
  EXPECT_EQ(e.y, d.y);
  EXPECT_EQ(e.z, d.z);
  EXPECT_EQ(e.t_idx, d.t_idx);
  EXPECT_EQ(e.x.values, d.x.values);
  EXPECT_EQ(*e.pi_hat, *d.pi_hat);
}

TEST(Holdout, DisjointCoverAndDeterministic) {
  auto [tr, ho] = holdout_indices(50, 10, 7);
  EXPECT_EQ(ho.size(), 10u);
  EXPECT_EQ(tr.size(), 40u);
  std::vector<int> seen(50, 0);
  for (auto i : tr) ++seen[i];
  for (auto i : ho) ++seen[i];
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(holdout_indices(50, 10, 7).second, ho);
  EXPECT_NE(holdout_indices(50, 10, 8).second, ho);
  EXPECT_THROW(holdout_indices(5, 5, 1), ValidationError);
  EXPECT_THROW(holdout_indices(5, 0, 1), ValidationError);
}

TEST(DrawsIo, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(DrawsIo, DrawMatrixRoundTrip) {
  DrawMatrix m(2, 3);
  for (std::size_t k = 0; k < 6; ++k) m.values[k] = 0.1 * static_cast<double>(k) - 0.17;
  fs::path p = fs::temp_directory_path() / "tsbcf_data_dm.csv";
  write_draw_matrix(p, m);
  DrawMatrix r = read_draw_matrix(p);
  EXPECT_EQ(r.rows, 2u);
  EXPECT_EQ(r.cols, 3u);
  EXPECT_EQ(r.values, m.values);
}
