#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "tsbcf/simbench.hpp"

namespace fs = std::filesystem;
using tsbcf::cli::run;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tsbcf_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path sim_csv(const fs::path& dir, std::size_t n) {
  tsbcf::RngStream rng(11, 0);
  auto sim = tsbcf::gen_dataset(tsbcf::ScenarioSpec{tsbcf::Scenario::kB, 0.25, n}, rng);
  fs::path p = dir / "data.csv";
  tsbcf::write_dataset(sim.data, p);
  return p;
}

std::vector<std::string> small_fit(const fs::path& data, const fs::path& out) {
  return {"fit",         "--data",   data.string(), "--out",     out.string(), "--n-mu", "10",
          "--n-tau",     "4",        "--burn",      "10",        "--draws",    "10",     "--prop-trees",
          "10",          "--prop-burn", "10",       "--prop-draws", "10",      "--holdout", "40"};
}

}  // namespace

TEST(Cli, HelpAndVersion) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"nonsense"}), 1);
}

TEST(Cli, MissingDatasetIsExitOne) {
  auto dir = scratch("missing");
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"fit", "--data", (dir / "nope.csv").string(), "--out", (dir / "o").string()}), 1);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("nope.csv"), std::string::npos);
}

TEST(Cli, FitSummarizeRoundTrip) {
  auto dir = scratch("fit");
  auto data = sim_csv(dir, 160);
  auto out = dir / "fit";
  ASSERT_EQ(run(small_fit(data, out)), 0);
  for (const char* f : {"mu.csv", "tau.csv", "f0.csv", "f1.csv", "traces.csv", "manifest.json",
                        "trees_mu.txt", "propensity.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["command"], "fit");
  EXPECT_EQ(manifest["holdout_rows"].size(), 40u);

  ASSERT_EQ(run({"summarize", "--fit", out.string(), "--min-leaf", "10"}), 0);
  for (const char* f : {"rr_by_target.csv", "nnt_by_target.csv", "cart_tree.txt", "treated_failure_excess.csv"}) {
    EXPECT_TRUE(fs::exists(out / "summary" / f)) << f;
  }
  EXPECT_EQ(run({"summarize", "--fit", out.string(), "--target-range", "5,6"}), 1);
  EXPECT_EQ(run({"summarize", "--fit", (dir / "absent").string()}), 1);
}

TEST(Cli, FitIsDeterministic) {
  auto dir = scratch("det");
  auto data = sim_csv(dir, 120);
  auto a = small_fit(data, dir / "a");
  auto b = small_fit(data, dir / "b");
  b.insert(b.end(), {"--threads", "2", "--chains", "1"});
  ASSERT_EQ(run(a), 0);
  ASSERT_EQ(run(b), 0);
  for (const char* f : {"mu.csv", "tau.csv", "f0.csv", "f1.csv", "traces.csv", "trees_mu.txt"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Cli, CalibratePrintsScales) {
  auto dir = scratch("cal");
  auto data = sim_csv(dir, 200);
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({"calibrate", "--data", data.string(), "--out", (dir / "c").string(), "--het-grid",
                 "--het-n", "20"}),
            0);
  const std::string text = testing::internal::GetCapturedStdout();
  EXPECT_NE(text.find("s_mu = 0.609"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "c" / "het_grid.csv"));
  EXPECT_TRUE(fs::exists(dir / "c" / "calibration.ini"));
}

TEST(Cli, ConfigFileSectionsAndOverride) {
  auto dir = scratch("cfg");
  auto data = sim_csv(dir, 100);
  std::ofstream(dir / "run.ini") << "[fit]\nn-mu = 8\nn-tau = 3\nburn = 5\ndraws = 7\nprop-trees = 5\n"
                                    "prop-burn = 5\nprop-draws = 5\ns-mu = 0.8\ns-tau = 0.3\n";
  ASSERT_EQ(run({"--config", (dir / "run.ini").string(), "fit", "--data", data.string(), "--out",
                 (dir / "o").string(), "--draws", "4"}),
            0);
  auto manifest = nlohmann::json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["n_draws"], 4);
  EXPECT_EQ(manifest["config"]["n_mu"], 8);
  EXPECT_DOUBLE_EQ(manifest["config"]["s_mu"].get<double>(), 0.8);
}

TEST(Cli, SimulateSmokeAndUnknownScenario) {
  auto dir = scratch("sim");
  std::vector<std::string> args{"simulate", "--scenarios", "E", "--models", "BCF-mode", "--replicates", "2",
                                "--n", "100", "--burn", "10", "--draws", "10", "--n-mu", "10", "--n-tau", "4",
                                "--prop-trees", "10", "--prop-burn", "10", "--prop-draws", "10", "--out",
                                (dir / "s").string()};
  ASSERT_EQ(run(args), 0);
  const std::string metrics = slurp(dir / "s" / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 2);
  args[2] = "Q";
  EXPECT_EQ(run(args), 1);
}

TEST(Cli, SingleArmCalibrationFallsBack) {
  auto dir = scratch("single");
  std::ofstream f(dir / "d.csv");
  f << "y,z,t,x\n";
  for (int i = 0; i < 40; ++i) f << (i % 3 == 0) << ",1," << (i % 4) << "," << i * 0.1 << "\n";
  f.close();
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"calibrate", "--data", (dir / "d.csv").string()}), 0);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("s_mu / 2"), std::string::npos);
}
