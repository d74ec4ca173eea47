#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "alseg/cli.hpp"
#include "alseg/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = alseg::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "alseg_cli_test";
    fs::remove_all(root_);
    const auto r = cli({"synth", "--subjects", "4", "--slices", "5", "--side", "16", "--seed", "7", "-o",
                        (root_ / "data").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path manifest() { return root_ / "data" / "manifest.json"; }
  static fs::path root_;
};
fs::path Cli::root_;

}  // namespace

TEST_F(Cli, SynthIsByteIdenticalOnRerun) {
  const auto r = cli({"synth", "--subjects", "4", "--slices", "5", "--side", "16", "--seed", "7", "-o",
                      (root_ / "data2").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"manifest.json", "images.f32", "masks.f32"}) {
    EXPECT_EQ(slurp(root_ / "data" / f), slurp(root_ / "data2" / f)) << f;
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({"synth", "--subjects", "4"}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"synth", "--side", "15", "-o", (root_ / "bad").string()}).code, 2);
  const auto r = cli({"run", "-m", manifest().string(), "-o", (root_ / "x").string(), "--strategy", "nosuch"});
  EXPECT_EQ(r.code, 2);
  for (const char* name : {"random", "entropy_umap", "pca_entropy", "coreset"}) {
    EXPECT_NE(r.err.find(name), std::string::npos) << name;
  }
  EXPECT_EQ(cli({"run", "-m", (root_ / "missing.json").string(), "-o", (root_ / "x").string()}).code, 2);
  EXPECT_EQ(cli({"embed", "--checkpoint", (root_ / "none.json").string(), "-m", manifest().string(), "-o",
                 (root_ / "e.csv").string()})
                .code,
            2);
}

TEST_F(Cli, ConfigUnknownKeyRejected) {
  const auto cfg = root_ / "bad.toml";
  std::ofstream(cfg) << "[experiment]\niterations = 2\nwibble = 3\n";
  const auto r = cli({"run", "-m", manifest().string(), "-c", cfg.string(), "-o", (root_ / "y").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("experiment.wibble"), std::string::npos);
  std::ofstream(cfg) << "[nonsense]\nx = 1\n";
  EXPECT_EQ(cli({"run", "-m", manifest().string(), "-c", cfg.string(), "-o", (root_ / "y").string()}).code, 2);
}

TEST_F(Cli, RunCompareReplayEmbed) {
  const auto cfg = root_ / "ci.toml";
  std::ofstream(cfg) << "[experiment]\niterations = 3\nepochs_per_iter = 1\nseeding_max_epochs = 2\n"
                        "[strategy]\nn_u = 2\nn_c = 4\n"
                        "[learner]\nlearning_rate = 1e-3\n";
  const auto out = root_ / "runs";
  auto r = cli({"run", "-m", manifest().string(), "-c", cfg.string(), "-o", out.string(), "-s",
                "random,entropy-umap", "--seed", "3", "-j", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(out / "entropy_umap" / "curve.csv"), 1 + 3);
  const auto cfg_back = alseg::load_run_record(out / "entropy_umap" / "run.json").config;
  EXPECT_EQ(cfg_back.iterations, 3);
  EXPECT_EQ(cfg_back.strategy.n_c, 4);
  EXPECT_EQ(cfg_back.seed, 3u);

  r = cli({"compare", "-b", (out / "random" / "run.json").string(), (out / "entropy_umap" / "run.json").string(),
           "-o", (root_ / "cmp").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // Header plus 7 metrics x 2 records.
  EXPECT_EQ(count_lines(root_ / "cmp" / "comparison.csv"), 1 + 14);
  EXPECT_TRUE(fs::exists(root_ / "cmp" / "comparison.json"));
  EXPECT_EQ(cli({"compare", (out / "random" / "run.json").string(), "-o", (root_ / "cmp2").string()}).code, 2);

  r = cli({"replay", (out / "entropy_umap" / "run.json").string(), "-m", manifest().string()});
  EXPECT_EQ(r.code, 0) << r.err << r.out;

  const auto ckpt = out / "random" / "checkpoint.json";
  r = cli({"eval", "--checkpoint", ckpt.string(), "-m", manifest().string(), "-o", (root_ / "eval.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(root_ / "eval.csv"), slurp(out / "random" / "holdout_metrics.csv"));

  const auto emb = root_ / "embed.csv";
  r = cli({"embed", "--checkpoint", ckpt.string(), "-m", manifest().string(), "-o", emb.string(),
           "--n-neighbors", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(emb), 1 + 20 * 2);
  const auto first = slurp(emb);
  EXPECT_EQ(first.substr(0, first.find('\n')), "sample_id,split,method,x,y");
  ASSERT_EQ(cli({"embed", "--checkpoint", ckpt.string(), "-m", manifest().string(), "-o", emb.string(),
                 "--n-neighbors", "5"})
                .code,
            0);
  EXPECT_EQ(slurp(emb), first);
}

TEST_F(Cli, ReplayDetectsTamperedHistory) {
  const auto out = root_ / "tamper";
  auto r = cli({"run", "-m", manifest().string(), "-o", out.string(), "-s", "entropy", "--iterations", "2",
                "--epochs", "1", "--nu", "2", "--nc", "2", "--no-diagnostics"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rec = alseg::load_run_record(out / "run.json");
  std::swap(rec.history[0].queried[0], rec.history[1].queried[0]);
  alseg::save_run_record(rec, out / "tampered.json");
  r = cli({"replay", (out / "tampered.json").string(), "-m", manifest().string()});
  EXPECT_EQ(r.code, 1);
}
