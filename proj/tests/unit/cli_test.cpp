#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(INBOX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("inbox_cli_" + std::to_string(::getpid()));
    fs::create_directories(root_);
    ASSERT_EQ(run("synth --out " + (root_ / "data").string() +
                  " --n-items 200 --n-users 20 --n-concepts 8 --d-true 4 --seed 3"),
              0);
    std::ofstream cfg(root_ / "tiny.cfg");
    cfg << "dim = 4\nbatch_size = 32\nn_negatives = 4\nbase_lr = 0.01\n"
           "epochs_pretrain = 1\nepochs_intersection = 1\nepochs_recommendation = 2\n";
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string train(const std::string& out, const std::string& extra = "") {
    return "train " + (root_ / "tiny.cfg").string() + " --dataset " + (root_ / "data").string() +
           " --out " + (root_ / out).string() + " --seed 1 " + extra;
  }

  static fs::path root_;
};
fs::path Cli::root_;

TEST_F(Cli, TrainEvalAndRerunAreReproducible) {
  ASSERT_EQ(run(train("a")), 0);
  ASSERT_EQ(run(train("b")), 0);
  for (const char* f : {"stage1.ckpt", "stage2.ckpt", "stage3.ckpt", "model.ckpt"}) {
    EXPECT_TRUE(fs::exists(root_ / "a" / f)) << f;
  }
  EXPECT_EQ(slurp(root_ / "a" / "model.ckpt"), slurp(root_ / "b" / "model.ckpt"));
  EXPECT_EQ(slurp(root_ / "a" / "train.log"), slurp(root_ / "b" / "train.log"));

  for (const char* r : {"a", "b"}) {
    ASSERT_EQ(run("eval --checkpoint " + (root_ / r / "model.ckpt").string() + " --dataset " +
                  (root_ / "data").string() + " --out " + (root_ / r / "report.txt").string()),
              0);
  }
  const std::string report = slurp(root_ / "a" / "report.txt");
  EXPECT_EQ(report, slurp(root_ / "b" / "report.txt"));
  EXPECT_EQ(report.rfind("recall ", 0), 0u);
}

TEST_F(Cli, ResumeFromStageCheckpointMatchesFullRun) {
  ASSERT_EQ(run(train("full")), 0);
  ASSERT_EQ(run(train("resumed", "--resume " + (root_ / "full" / "stage2.ckpt").string())), 0);
  EXPECT_EQ(slurp(root_ / "full" / "model.ckpt"), slurp(root_ / "resumed" / "model.ckpt"));
}

TEST_F(Cli, VariantIsRecordedInLog) {
  ASSERT_EQ(run(train("mm", "--maxmin --no-pretrain")), 0);
  const std::string log = slurp(root_ / "mm" / "train.log");
  EXPECT_EQ(log.find("# stage 1"), std::string::npos);
  EXPECT_NE(log.find("# stage 2"), std::string::npos);
  EXPECT_NE(log.find("intersection_variant maxmin"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("train --set dimm=3 --dataset " + (root_ / "data").string() + " --out " +
                (root_ / "x").string()),
            2);
  EXPECT_EQ(run(train("y", "--no-user-bias --only-user-bias")), 2);
  EXPECT_EQ(run("train --dataset " + (root_ / "missing").string() + " --out " +
                (root_ / "z").string()),
            3);
  EXPECT_EQ(run("eval --checkpoint " + (root_ / "nope.ckpt").string() + " --dataset " +
                (root_ / "data").string()),
            3);
  EXPECT_EQ(run("prepare " + (root_ / "data").string()), 0);
  EXPECT_EQ(run("export-projection --checkpoint " + (root_ / "nope.ckpt").string() +
                " --dataset " + (root_ / "data").string() + " --relation 0 --tag 0"),
            3);
  EXPECT_EQ(run("frobnicate"), 2);
}

}  // namespace
