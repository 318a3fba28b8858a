#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "harood/config.hpp"
#include "harood/pipeline.hpp"
#include "test_support.hpp"

using namespace harood;

namespace {

struct Result {
  int status = 0;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(HAROOD_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, "popen failed"};
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

RunConfig tiny_config() {
  RunConfig c;
  c.seed = 3;
  c.dataset = test::tiny_recipe(12);
  c.model.autoencoder.channels = {4, 8};
  c.model.head.channels = {8};
  c.model.head.embedding_dim = 16;
  c.model.classifier.hidden = 16;
  c.stage1.batch_size = 8;
  c.stage1.batches_per_epoch = 2;
  c.stage2.epochs = 5;
  c.stage2.batch_size = 8;
  c.evaluation.timing_repeats = 1;
  return c;
}

void write_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream(path) << run_config_to_json(c).dump(2);
}

}  // namespace

TEST(Cli, EvaluateWithoutCheckpointFails) {
  test::TempDir dir("cli_nockpt");
  const Result r = run("evaluate --out " + quoted(dir.path()));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("checkpoint not found"), std::string::npos) << r.output;
}

TEST(Cli, UnknownConfigKeyFails) {
  test::TempDir dir("cli_badkey");
  nlohmann::json j = run_config_to_json(tiny_config());
  j["stage1"]["learning_rate_typo"] = 1.0;
  std::ofstream(dir.path() / "c.json") << j.dump();
  const Result r = run("simulate --config " + quoted(dir.path() / "c.json") + " --out " + quoted(dir.path()));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("learning_rate_typo"), std::string::npos) << r.output;
}

TEST(Cli, UnknownBaselineFails) {
  test::TempDir dir("cli_badbase");
  const Result r = run("evaluate --baselines msp,mahalanobis --out " + quoted(dir.path()));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("mahalanobis"), std::string::npos) << r.output;
}

TEST(Cli, MissingSubcommandFails) { EXPECT_NE(run("").status, 0); }

TEST(Cli, ConfigJsonRoundTrip) {
  const RunConfig c = tiny_config();
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(c));
  EXPECT_EQ(back.dataset, c.dataset);
  EXPECT_EQ(back.model, c.model);
  EXPECT_NE(c.dataset_seed(), c.init_seed());
  EXPECT_NE(c.stage1_seed(), c.stage2_seed());
}

TEST(Cli, EndToEndRunIsReproducible) {
  test::TempDir dir("cli_e2e");
  write_config(tiny_config(), dir.path() / "tiny.json");
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = dir.path() / ("run" + std::to_string(k));
    const Result r = run("all --config " + quoted(dir.path() / "tiny.json") + " --out " + quoted(out));
    ASSERT_EQ(r.status, 0) << r.output;
    for (const char* f : {"dataset/manifest.json", "model/harood.ckpt", "model/stage1.ckpt", "model/training_log.json",
                          "eval/report.json", "eval/report.txt", "eval/timing.json", "eval/scores_harood.txt",
                          "eval/scores_odin.txt", "eval/plots/roc.svg", "eval/plots/pr.svg",
                          "eval/plots/confusion.svg"})
      EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
    reports[k] = test::read_bytes(out / "eval/report.json");
  }
  EXPECT_FALSE(reports[0].empty());
  EXPECT_EQ(reports[0], reports[1]);

  const auto out = dir.path() / "run0";
  const auto report = evaluation_report_from_json(nlohmann::json::parse(reports[0]));
  EXPECT_EQ(report.methods.size(), 5u);
  EXPECT_EQ(report.methods.front().method, "harood");
  EXPECT_EQ(report.n_test_id, 24u);
  EXPECT_EQ(report.n_test_ood, 20u);

  // Re-evaluating a subset of baselines from an explicit checkpoint works.
  const Result again = run("evaluate --config " + quoted(dir.path() / "tiny.json") + " --out " + quoted(out) +
                           " --baselines msp --checkpoint " + quoted(out / "model/stage1.ckpt"));
  EXPECT_EQ(again.status, 0) << again.output;
}
