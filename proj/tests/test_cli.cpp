#include <filesystem>
#include <sstream>

#include "test_support.hpp"
#include "twophase/cli.hpp"

using namespace twophase;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return (fs::path(TWOPHASE_FIXTURES_DIR) / name).string(); }

std::string scratch(const std::string& name) {
  const auto dir = fs::path(TWOPHASE_TMP_DIR) / ("cli_" + name);
  fs::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("compare"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"select", "--bundle", fixture("tweet"), "--algorithm", "xx"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  const auto bad = run({"--json-errors", "compare", "--nope"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(nlohmann::json::parse(bad.err)["error"]["exit_code"], 2);
}

TEST(Cli, ValidationErrorsExitOne) {
  const auto missing = run({"compare", "--bundle", scratch("nowhere")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("bundle directory not found"), std::string::npos);
  const auto json = run({"--json-errors", "compare", "--bundle", fixture("tweet"), "--k-sim", "0"});
  EXPECT_EQ(json.code, 1);
  const auto doc = nlohmann::json::parse(json.err);
  EXPECT_EQ(doc["error"]["kind"], "config");
  EXPECT_EQ(run({"compare", "--bundle", fixture("tweet"), "--k-recall", "99"}).code, 1);
}

TEST(Cli, CompareReproducesFixtureNumbers) {
  const auto out_dir = scratch("compare");
  const auto r = run({"compare", "--bundle", fixture("xray"), "--out", out_dir});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("BF,120,"), std::string::npos);
  EXPECT_NE(r.out.find("SH,55,"), std::string::npos);
  EXPECT_NE(r.out.find("2PH,18,"), std::string::npos);
  EXPECT_NE(r.out.find(",6.67,3.06"), std::string::npos);
  for (const char* f : {"report.csv", "clusters.json", "proxy.csv", "recall.csv", "selection_log.json", "trends.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(out_dir) / f)) << f;
  }
  EXPECT_EQ(text::read_file((fs::path(out_dir) / "report.csv").string()), r.out);
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  const auto cfg = (fs::path(dir) / "config.json").string();
  text::write_file(cfg, R"({"threshold": 0.0, "coarse_cost_per_eval": 0.0})");
  const auto r = run({"compare", "--bundle", fixture("tweet"), "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("2PH,14,"), std::string::npos);
  // Flags override the file.
  const auto o = run({"compare", "--bundle", fixture("tweet"), "--config", cfg, "--coarse-cost", "0.5"});
  EXPECT_NE(o.out.find("2PH,19,"), std::string::npos);
  text::write_file(cfg, R"({"thresold": 0.1})");
  EXPECT_EQ(run({"compare", "--bundle", fixture("tweet"), "--config", cfg}).code, 1);
}

TEST(Cli, SelectAlgorithms) {
  const auto fs_run = run({"select", "--bundle", fixture("threshold"), "--threshold", "0.05"});
  ASSERT_EQ(fs_run.code, 0) << fs_run.err;
  EXPECT_NE(fs_run.out.find("FS,15,thr-m01,0.87"), std::string::npos);
  EXPECT_NE(run({"select", "--bundle", fixture("threshold"), "--algorithm", "sh"}).out.find("SH,19,"), std::string::npos);
  EXPECT_NE(run({"select", "--bundle", fixture("threshold"), "--algorithm", "bf"}).out.find("BF,50,thr-m01"), std::string::npos);
  const auto sub = run({"select", "--bundle", fixture("threshold"), "--models", "thr-m03,thr-m04", "--algorithm", "bf"});
  EXPECT_NE(sub.out.find("BF,10,thr-m03"), std::string::npos);
  const auto dir = scratch("select");
  EXPECT_EQ(run({"select", "--bundle", fixture("threshold"), "--out", dir}).code, 0);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "trends.json"));
}

TEST(Cli, ClusterLeepRecall) {
  const auto c = run({"cluster", "--bundle", fixture("xray")});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto doc = nlohmann::json::parse(c.out);
  EXPECT_EQ(doc["clusters"].size(), 20u);
  const auto km = run({"cluster", "--bundle", fixture("xray"), "--method", "kmeans", "--k-clusters", "3"});
  EXPECT_EQ(nlohmann::json::parse(km.out)["clusters"].size(), 3u);

  const auto l = run({"leep", "--bundle", fixture("xray")});
  ASSERT_EQ(l.code, 0) << l.err;
  EXPECT_EQ(std::count(l.out.begin(), l.out.end(), '\n'), 11);
  const auto dump = (fs::path(fixture("xray")) / "dumps" / "cv-m00.csv").string();
  const auto single = run({"leep", "--dump", dump});
  ASSERT_EQ(single.code, 0) << single.err;
  EXPECT_NE(single.out.find("cv-m00,"), std::string::npos);

  const auto dir = scratch("recall");
  const auto r = run({"recall", "--bundle", fixture("xray"), "--out", dir});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 31);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "recall.csv"));
}

TEST(Cli, GenerateAndSimulate) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run({"--seed", "5", "gen-synthetic", "--spec", "spec.json", "--preset", "threshold", "--out", dir}).code, 2);
  const auto spec_path = (fs::path(TWOPHASE_TMP_DIR) / "spec.json").string();
  fs::create_directories(TWOPHASE_TMP_DIR);
  text::write_file(spec_path, R"({"blocks": [3, 3], "singletons": 1, "stages": 4})");
  ASSERT_EQ(run({"--seed", "5", "gen-synthetic", "--spec", spec_path, "--out", dir}).code, 0);
  const auto b = load_bundle(dir);
  EXPECT_EQ(b.repository.size(), 7u);
  EXPECT_EQ(b.total_steps, 4u);
  const auto again = scratch("gen2");
  run({"--seed", "5", "gen-synthetic", "--spec", spec_path, "--out", again});
  EXPECT_EQ(text::read_file((fs::path(dir) / "matrix.csv").string()), text::read_file((fs::path(again) / "matrix.csv").string()));

  const auto sim = run({"--seed", "3", "simulate", "--spec", spec_path});
  ASSERT_EQ(sim.code, 0) << sim.err;
  EXPECT_NE(sim.out.find("BF,28,"), std::string::npos);
  EXPECT_NE(sim.out.find("SH,"), std::string::npos);
  EXPECT_NE(sim.out.find("FS,"), std::string::npos);
}
