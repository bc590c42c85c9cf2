#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <sys/wait.h>

#include "spmseg/dataset.hpp"
#include "spmseg/io.hpp"
#include "support/test_util.hpp"

using namespace spmseg;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SPMSEG_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    log_ = dir_.path() / "log.txt";
    ASSERT_EQ(exec("synth --out " + p("data") + " --count 3 --width 64 --height 64 --regime fingering --seed 4"), 0)
        << slurp(log_);
  }

  int exec(const std::string& args) { return run(args, log_); }
  std::string p(const std::string& rel) const { return (dir_.path() / rel).string(); }
  std::string data(int i, bool mask = false) const {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d%s.png", i, mask ? "_mask" : "");
    return p("data/" + std::string(name));
  }

  test::TempDir dir_;
  fs::path log_;
};

}  // namespace

TEST_F(Cli, VersionAndUsageErrors) {
  EXPECT_EQ(exec("--version"), 0);
  EXPECT_NE(slurp(log_).find("0.1.0"), std::string::npos);
  EXPECT_EQ(exec(""), 1);
  EXPECT_EQ(exec("frobnicate"), 1);
  EXPECT_EQ(exec("segment " + data(0) + " --out " + p("o") + " --method bogus"), 1);
  EXPECT_EQ(exec("segment " + data(0) + " --out " + p("o") + " --window 4"), 1);
  EXPECT_EQ(exec("segment " + data(0) + " --out " + p("o") + " --window abc"), 1);
  EXPECT_FALSE(fs::exists(p("o")));
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(exec("segment " + p("data/missing.png") + " --out " + p("o")), 2);
  EXPECT_NE(slurp(log_).find("missing.png"), std::string::npos);
  std::ofstream(p("junk.png")) << "not a png";
  EXPECT_EQ(exec("minkowski " + p("junk.png") + " --out " + p("o")), 2);
  EXPECT_FALSE(fs::exists(p("o")));
}

TEST_F(Cli, SegmentOtsuRecordsThreshold) {
  ASSERT_EQ(exec("segment --method otsu --despeckle " + data(0) + " --out " + p("seg")), 0) << slurp(log_);
  ASSERT_TRUE(fs::exists(p("seg/synth_000_mask.png")));
  const auto manifest = nlohmann::json::parse(slurp(p("seg/manifest.json")));
  EXPECT_EQ(manifest["tool"], "spmseg");
  EXPECT_EQ(manifest["version"], "0.1.0");
  EXPECT_EQ(manifest["command"], "segment");
  EXPECT_EQ(manifest["config"]["method"], "otsu");
  EXPECT_EQ(manifest["config"]["despeckle"], true);
  EXPECT_NE(slurp(p("seg/manifest.json")).find("threshold"), std::string::npos);
  const BinaryMask m = load_mask(p("seg/synth_000_mask.png"));
  EXPECT_EQ(m.width(), 64);
}

TEST_F(Cli, SweepHasFourRows) {
  ASSERT_EQ(exec("sweep --thresholds 105,115,125,135 " + data(1) + " --out " + p("sw")), 0) << slurp(log_);
  std::istringstream csv(slurp(p("sw/sweep.csv")));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0].substr(0, 16), "image,threshold,");
  EXPECT_NE(lines[1].find(",105,"), std::string::npos);
  EXPECT_NE(lines[4].find(",135,"), std::string::npos);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  const std::string args = " " + data(0) + " " + data(1) + " " + data(2) + " --threads 2 --out ";
  ASSERT_EQ(exec("robustness --rescale --noises banding,stripes" + args + p("r1")), 0) << slurp(log_);
  ASSERT_EQ(exec("robustness --rescale --noises banding,stripes" + args + p("r2")), 0) << slurp(log_);
  EXPECT_EQ(slurp(p("r1/robustness.csv")), slurp(p("r2/robustness.csv")));
  EXPECT_EQ(slurp(p("r1/sensitivity.csv")), slurp(p("r2/sensitivity.csv")));
  ASSERT_EQ(exec("synth --out " + p("s2") + " --count 3 --width 64 --height 64 --regime fingering --seed 4"), 0);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(slurp(data(i)), slurp(p("s2/synth_00" + std::to_string(i) + ".png")));
  }
}

TEST_F(Cli, ManifestRerunReproduces) {
  ASSERT_EQ(exec("sweep --thresholds 90,150 " + data(0) + " --out " + p("a")), 0) << slurp(log_);
  ASSERT_EQ(exec("sweep --config " + p("a/manifest.json") + " --out " + p("b")), 0) << slurp(log_);
  EXPECT_EQ(slurp(p("a/sweep.csv")), slurp(p("b/sweep.csv")));
  // A manifest from another command is rejected.
  EXPECT_EQ(exec("segment --config " + p("a/manifest.json") + " --out " + p("c")), 1);
  EXPECT_FALSE(fs::exists(p("c")));
}

TEST_F(Cli, TomlConfig) {
  std::ofstream(p("cfg.toml")) << "thresholds = [100, 120, 140]\nthreads = 1\n";
  ASSERT_EQ(exec("sweep --config " + p("cfg.toml") + " " + data(0) + " --out " + p("t")), 0) << slurp(log_);
  std::istringstream csv(slurp(p("t/sweep.csv")));
  std::string line;
  int n = 0;
  while (std::getline(csv, line)) ++n;
  EXPECT_EQ(n, 4);
  std::ofstream(p("bad.toml")) << "no_such_key = 3\n";
  EXPECT_EQ(exec("sweep --config " + p("bad.toml") + " " + data(0) + " --out " + p("u")), 1);
  std::ofstream(p("type.toml")) << "thresholds = \"high\"\n";
  EXPECT_EQ(exec("sweep --config " + p("type.toml") + " " + data(0) + " --out " + p("u")), 1);
}

TEST_F(Cli, FailedRunLeavesNoPartialOutputs) {
  std::ofstream(p("junk.png")) << "not a png";
  EXPECT_EQ(exec("segment " + data(0) + " " + p("junk.png") + " --out " + p("part")), 2);
  EXPECT_FALSE(fs::exists(p("part")));
  fs::create_directories(p("existing"));
  std::ofstream(p("existing/keep.txt")) << "keep";
  EXPECT_EQ(exec("segment " + data(0) + " " + p("junk.png") + " --out " + p("existing")), 2);
  EXPECT_TRUE(fs::exists(p("existing/keep.txt")));
  EXPECT_FALSE(fs::exists(p("existing/synth_000_mask.png")));
  EXPECT_FALSE(fs::exists(p("existing/manifest.json")));
}

TEST_F(Cli, InputsAreNeverOverwritten) {
  fs::create_directories(p("o"));
  fs::copy_file(data(0), p("o/x.png"));
  fs::copy_file(data(1), p("o/x_mask.png"));
  const std::string before = slurp(p("o/x_mask.png"));
  EXPECT_NE(exec("segment " + p("o/x.png") + " " + p("o/x_mask.png") + " --out " + p("o")), 0);
  EXPECT_EQ(slurp(p("o/x_mask.png")), before);
  EXPECT_NE(slurp(log_).find("overwrite"), std::string::npos);
}

TEST_F(Cli, AugmentTrainInfer) {
  ASSERT_EQ(exec("augment --process 3 " + data(0) + " " + data(1) + " --masks " + data(0, true) + "," +
                 data(1, true) + " --out " + p("aug")),
            0)
      << slurp(log_);
  std::istringstream pairs(slurp(p("aug/pairs.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(pairs, line)) ++rows;
  EXPECT_EQ(rows, 11);
  ASSERT_EQ(exec("train --pairs-csv " + p("aug/pairs.csv") +
                 " --depth 1 --base-channels 2 --input-size 16 --epochs 2 --batch-size 4 --out " + p("tr")),
            0)
      << slurp(log_);
  ASSERT_TRUE(fs::exists(p("tr/unet.weights")));
  std::istringstream loss(slurp(p("tr/loss.csv")));
  rows = 0;
  while (std::getline(loss, line)) ++rows;
  EXPECT_EQ(rows, 4);  // header, initial, two epochs
  ASSERT_EQ(exec("infer --weights " + p("tr/unet.weights") + " " + data(2) + " --out " + p("inf")), 0)
      << slurp(log_);
  EXPECT_EQ(load_mask(p("inf/synth_002_mask.png")).width(), 64);
  ASSERT_EQ(exec("train --pairs-csv " + p("aug/pairs.csv") +
                 " --depth 1 --base-channels 2 --input-size 16 --epochs 2 --batch-size 4 --out " + p("tr2")),
            0);
  EXPECT_EQ(slurp(p("tr/unet.weights")), slurp(p("tr2/unet.weights")));
  EXPECT_EQ(exec("infer --weights " + p("junk.weights") + " " + data(2) + " --out " + p("inf2")), 2);
}

TEST_F(Cli, SplitCuratesAndAssigns) {
  std::vector<DatasetRecord> rs(6);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    rs[i].image = "i" + std::to_string(i) + ".png";
    rs[i].regime = i == 0 ? Regime::none : Regime::islands;
  }
  {
    std::ofstream out(p("records.jsonl"));
    write_records(out, rs);
  }
  ASSERT_EQ(exec("split --records " + p("records.jsonl") + " --assign-u --seed 3 --out " + p("sp")), 0)
      << slurp(log_);
  const auto out = read_records(fs::path(p("sp/records.jsonl")));
  ASSERT_EQ(out.size(), 6u);
  EXPECT_EQ(*out[0].split, Split::excluded);
  int test = 0;
  for (std::size_t i = 1; i < 6; ++i) test += *out[i].split == Split::test;
  EXPECT_EQ(test, 2);
  EXPECT_EQ(read_records(fs::path(p("records.jsonl")))[1].random_u, 0.0);
}

TEST_F(Cli, MinkowskiAndPreprocess) {
  ASSERT_EQ(exec("minkowski " + data(0, true) + " --out " + p("mk")), 0) << slurp(log_);
  EXPECT_NE(slurp(p("mk/minkowski.csv")).find("synth_000_mask.png"), std::string::npos);
  ASSERT_EQ(exec("preprocess --align --detrend --equalize --cluster kmeans " + data(0) + " --out " + p("pp")), 0)
      << slurp(log_);
  EXPECT_TRUE(fs::exists(p("pp/synth_000.png")));
}
