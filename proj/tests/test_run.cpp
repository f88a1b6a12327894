#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bphlife/run.hpp"

using namespace bphlife;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kSample = std::string(BPHLIFE_SOURCE_DIR) + "/configs/couple_42_35.json";

class RunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bphlife_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    cfg_ = parse_config(read_file(kSample));
    cfg_.output_dir = dir_.string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::pair<double, double>> read_pairs(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::vector<std::pair<double, double>> rows;
    double t, v;
    while (in >> t >> v) rows.emplace_back(t, v);
    return rows;
  }

  fs::path dir_;
  RunConfig cfg_;
  std::ostringstream log_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BPHLIFE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_F(RunTest, CurvesFilesFollowThePlotDataFormat) {
  const auto r = run(cfg_, Command::curves, log_);
  EXPECT_EQ(r.exit_code, kExitOk);
  for (const char* name : {"p00.data", "p01.data", "p02.data", "p_x.data", "p_y.data"}) {
    const auto rows = read_pairs(name);
    ASSERT_EQ(rows.size(), 121u) << name;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      EXPECT_GE(rows[k].second, 0.0);
      EXPECT_LE(rows[k].second, 1.0);
      if (k) EXPECT_GT(rows[k].first, rows[k - 1].first);
    }
  }
  EXPECT_EQ(read_file(dir_ / "p00.data").substr(0, 4), "0 1\n");
}

TEST_F(RunTest, ApvTableHasOneRowPerRate) {
  run(cfg_, Command::apv, log_);
  std::ifstream in(dir_ / "apv.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "rate,a_joint,a_x,a_y,a_last,a_rev,A_joint,A_x,A_y,A_last");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream s(line);
    std::string cell;
    int cols = 0;
    while (std::getline(s, cell, ',')) {
      EXPECT_GE(std::stod(cell), 0.0);
      ++cols;
    }
    EXPECT_EQ(cols, 10);
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(RunTest, ManifestCarriesIssueAgesAndProvenance) {
  const auto r = run(cfg_, Command::apv, log_);
  const auto m = nlohmann::json::parse(read_file(dir_ / "manifest_apv.json"));
  EXPECT_EQ(m, r.manifest);
  EXPECT_EQ(m["issue_ages"]["i"], 100);
  EXPECT_EQ(m["issue_ages"]["j"], 84);
  EXPECT_EQ(m["config_hash"], config_hash(cfg_));
  EXPECT_EQ(m["seed"], 42);
  EXPECT_TRUE(m.contains("version"));
}

TEST_F(RunTest, HazardFilesStartAfterTheDeath) {
  cfg_.grid = {0.0, 30.0, 0.5};
  run(cfg_, Command::hazard, log_);
  const auto x = read_pairs("mu_x_given_y.data");
  const auto y = read_pairs("mu_y_given_x.data");
  ASSERT_EQ(x.size(), 20u);
  EXPECT_DOUBLE_EQ(x.front().first, 20.5);
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_GT(x[k].second, 0.0);
    EXPECT_GT(y[k].second, 0.0);
  }
  cfg_.grid = {0.0, 20.0, 0.5};
  EXPECT_THROW(run(cfg_, Command::hazard, log_), ValidationError);
}

TEST_F(RunTest, SimulateIsByteForByteReproducible) {
  cfg_.n_paths = 20000;
  cfg_.correlation_paths = 5000;
  const auto first = run(cfg_, Command::simulate, log_);
  const std::string a = read_file(dir_ / "simulate.csv");
  const std::string ma = read_file(dir_ / "manifest_simulate.json");
  const auto second = run(cfg_, Command::simulate, log_);
  EXPECT_EQ(a, read_file(dir_ / "simulate.csv"));
  EXPECT_EQ(ma, read_file(dir_ / "manifest_simulate.json"));
  EXPECT_EQ(first.exit_code, kExitOk);
  EXPECT_EQ(a.substr(0, a.find('\n')), "quantity,mc_value,mc_std_error,closed_form,z_score,agree");
  EXPECT_TRUE(first.manifest["correlation"]["pearson_in_range"].get<bool>());
}

TEST_F(RunTest, AgeDistributionNeedsRealAges) {
  run(cfg_, Command::agedist, log_);
  double total = 0.0;
  for (const auto& [k, p] : read_pairs("agedist_wife.data")) total += p;
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(read_pairs("agedist_husband.data").size(), 200u);

  cfg_.real_age_husband.reset();
  cfg_.real_age_wife.reset();
  cfg_.params.i = 100;
  cfg_.params.j = 84;
  EXPECT_THROW(run(cfg_, Command::agedist, log_), ValidationError);
}

TEST_F(RunTest, ValidateWritesOnlyTheManifest) {
  const auto r = run(cfg_, Command::validate, log_);
  EXPECT_EQ(r.files, std::vector<std::string>{"manifest_validate.json"});
}

TEST(Cli, ExitCodes) {
  const auto dir = fs::temp_directory_path() / "bphlife_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  EXPECT_EQ(run_cli("validate --config " + kSample + " --out " + dir.string()), 0);
  EXPECT_EQ(run_cli("apv --config " + kSample + " --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "apv.csv"));

  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{}";
  EXPECT_EQ(run_cli("apv --config " + bad.string()), 1);
  EXPECT_EQ(run_cli("apv --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("curves --config " + kSample + " --out " + dir.string() + " --grid 0:5"), 1);
  EXPECT_EQ(run_cli("nonsense"), 1);
  EXPECT_EQ(run_cli("curves --config " + kSample + " --out " + dir.string() + " --grid 0:5:1"), 0);
  EXPECT_EQ(read_file(dir / "p00.data").substr(0, 4), "0 1\n");

  // Real ages far beyond the model's reach make the survival mass underflow.
  auto doc = nlohmann::json::parse(read_file(kSample));
  doc["real_age_husband"] = 5000;
  std::ofstream(dir / "old.json") << doc.dump();
  EXPECT_EQ(run_cli("apv --config " + (dir / "old.json").string() + " --out " + dir.string()), 2);
  fs::remove_all(dir);
}
