#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "phasor/experiment.hpp"
#include "test_support.hpp"

namespace phasor {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("PHASE_SEED");
    config_ = dir_.path() / "small.json";
    std::ofstream(config_) << R"({"data": {"n_reviews": 150}, "train": {"epochs": 2}})";
  }

  std::vector<std::string> base(std::vector<std::string> tail) const {
    std::vector<std::string> a{"--config", config_.string(), "--out", (dir_.path() / "runs").string()};
    a.insert(a.end(), tail.begin(), tail.end());
    return a;
  }

  fs::path only_run_dir() const {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir_.path() / "runs")) dirs.push_back(e.path());
    EXPECT_EQ(dirs.size(), 1u);
    return dirs.at(0);
  }

  testing::TempDir dir_{"cli"};
  fs::path config_;
};

TEST_F(CliTest, HelpListsSubcommands) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"gen-data", "extract", "train", "eval", "analyze", "grad-check", "ablate",
                        "--projection", "--mask", "--angle-mode", "--paper-literal-sign", "--w_amp",
                        "--tau_ibn", "--frozen-embeddings"}) {
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  }
}

TEST_F(CliTest, UsageErrorsExitOneWithJsonDiagnostic) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"train", "--bogus"}, {"--mask", "maybe", "train"}, {"--projection", "soft", "train"}}) {
    const Result r = run(args);
    EXPECT_EQ(r.code, 1);
    const auto j = nlohmann::json::parse(r.err);
    EXPECT_EQ(j.at("exit_code"), 1);
    EXPECT_TRUE(j.contains("error"));
    EXPECT_TRUE(j.contains("message"));
  }
}

TEST_F(CliTest, InvalidConfigExitsOne) {
  std::ofstream(dir_.path() / "bad.json") << R"({"train": {"epochs": 0}})";
  const Result r = run({"--config", (dir_.path() / "bad.json").string(), "train"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "validation");
}

TEST_F(CliTest, SchemaPrintsJson) {
  const Result r = run({"schema"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out), experiment_schema());
}

TEST_F(CliTest, GradCheckWritesPassingReport) {
  const Result r = run(base({"--seed", "7", "grad-check", "--instances", "5"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(testing::slurp(only_run_dir() / "grad_check.json"));
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_LT(j.at("max_rel_error").get<double>(), 1e-5);
  EXPECT_NE(only_run_dir().filename().string().find("-s7"), std::string::npos);
}

TEST_F(CliTest, TrainTwiceGivesIdenticalArtifacts) {
  ASSERT_EQ(run(base({"--seed", "1", "train"})).code, 0);
  const fs::path run_dir = only_run_dir();
  const std::string metrics = testing::slurp(run_dir / "metrics.jsonl");
  const std::string manifest = testing::slurp(run_dir / "checkpoint" / "manifest.json");
  const std::string table = testing::slurp(run_dir / "checkpoint" / "encoder.token_table.embf");
  ASSERT_EQ(run(base({"--seed", "1", "train"})).code, 0);
  EXPECT_EQ(testing::slurp(run_dir / "metrics.jsonl"), metrics);
  EXPECT_EQ(testing::slurp(run_dir / "checkpoint" / "manifest.json"), manifest);
  EXPECT_EQ(testing::slurp(run_dir / "checkpoint" / "encoder.token_table.embf"), table);
  EXPECT_FALSE(fs::exists(run_dir / ".lock"));
}

TEST_F(CliTest, EnvironmentSeedIsOverriddenByFlag) {
  setenv("PHASE_SEED", "5", 1);
  ASSERT_EQ(run(base({"gen-data"})).code, 0);
  EXPECT_NE(only_run_dir().filename().string().find("-s5"), std::string::npos);
  fs::remove_all(dir_.path() / "runs");
  ASSERT_EQ(run(base({"--seed", "6", "gen-data"})).code, 0);
  EXPECT_NE(only_run_dir().filename().string().find("-s6"), std::string::npos);
  setenv("PHASE_SEED", "abc", 1);
  EXPECT_EQ(run(base({"gen-data"})).code, 1);
  unsetenv("PHASE_SEED");
}

TEST_F(CliTest, PipelineCommandsWriteExpectedFiles) {
  ASSERT_EQ(run(base({"gen-data"})).code, 0);
  ASSERT_EQ(run(base({"extract"})).code, 0);
  const fs::path run_dir = only_run_dir();
  for (const char* f : {"corpus.jsonl", "blocks_train.jsonl", "blocks_test.jsonl", "triplets.jsonl",
                        "triplet_warnings.jsonl", "config.json"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }
  EXPECT_EQ(run(base({"eval"})).code, 1);  // no checkpoint yet
  ASSERT_EQ(run(base({"train"})).code, 0);
  ASSERT_EQ(run(base({"eval"})).code, 0);
  const std::string csv = testing::slurp(run_dir / "metrics.csv");
  EXPECT_EQ(csv.rfind("aspect,f1,acc\n", 0), 0u);
  EXPECT_NE(csv.find("\nMACRO,"), std::string::npos);

  ASSERT_EQ(run(base({"analyze", "sim"})).code, 0);
  bool any_sim = false;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    any_sim |= e.path().filename().string().rfind("sim_", 0) == 0;
  }
  EXPECT_TRUE(any_sim);
  ASSERT_EQ(run(base({"analyze", "amp"})).code, 0);
  for (const char* f : {"amplitude.csv", "amplitude_hist.svg", "amplitude_scatter.svg",
                        "amplitude_summary.json"}) {
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  }
  EXPECT_EQ(run(base({"analyze", "amp", "--aspect", "nonexistent"})).code, 1);
  ASSERT_EQ(run(base({"analyze", "grad", "--points", "11"})).code, 0);
  const std::string landscape = testing::slurp(run_dir / "landscape.csv");
  EXPECT_EQ(std::count(landscape.begin(), landscape.end(), '\n'), 12);
}

TEST_F(CliTest, LockedRunDirectoryIsRuntimeError) {
  ASSERT_EQ(run(base({"gen-data"})).code, 0);
  const fs::path run_dir = only_run_dir();
  std::ofstream(run_dir / ".lock") << "";
  const Result r = run(base({"gen-data"}));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "io");
}

TEST_F(CliTest, AblateRunsFiveLegs) {
  ASSERT_EQ(run(base({"--epochs", "1", "ablate"})).code, 0);
  const fs::path run_dir = only_run_dir();
  const std::string csv = testing::slurp(run_dir / "ablation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  for (const char* leg : {"full", "hard_chunk", "no_mask", "no_angle", "amp_penalty"}) {
    EXPECT_TRUE(fs::exists(run_dir / "ablate" / leg / "metrics.csv")) << leg;
  }
}

}  // namespace
}  // namespace phasor
