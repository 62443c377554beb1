// Drives the installed binary end to end and checks exit codes and outputs.
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <sstream>

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TRUSTAGG_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = (dir_ / "moons.csv").string();
    const Result r = run("synth --kind moons --n 300 --noise 0.2 --seed 1 --out " + data_);
    ASSERT_EQ(r.code, 0) << r.out;
  }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  testutil::TempDir dir_;
  std::string data_;
};

}  // namespace

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("train --k notanumber --data " + data_).code, 2);
}

TEST_F(Cli, MissingDataIsConfigError) {
  const Result r = run("train --data " + out("nope.csv") + " --out " + out("o"));
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(Cli, BadLabelIsDataError) {
  testutil::write_file(dir_ / "bad.csv", "x,label\n1,0\n2,abc\n");
  EXPECT_EQ(run("train --data " + out("bad.csv") + " --out " + out("o")).code, 3);
}

TEST_F(Cli, DivergenceIsNumericError) {
  const Result r = run("train --lr 1e300 --data " + data_ + " --out " + out("o"));
  EXPECT_EQ(r.code, 4) << r.out;
}

TEST_F(Cli, TrainWritesModelAndTrace) {
  const Result r = run("train --epochs 20 --data " + data_ + " --out " + out("t"));
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string model = testutil::read_file(dir_ / "t" / "model.txt");
  EXPECT_FALSE(model.empty());
  const std::string trace = testutil::read_file(dir_ / "t" / "loss_trace.csv");
  EXPECT_EQ(trace.rfind("epoch,loss\n", 0), 0u);
  EXPECT_EQ(count_lines(trace), 22u);
}

TEST_F(Cli, EvalScorerErrors) {
  EXPECT_EQ(run("eval --scorers nonesuch --data " + data_ + " --out " + out("e")).code, 2);
  EXPECT_EQ(run("eval --scorers , --data " + data_ + " --out " + out("e")).code, 2);
  EXPECT_EQ(run("eval --k 0 --data " + data_ + " --out " + out("e")).code, 2);
}

TEST_F(Cli, EvalTableShape) {
  const Result r = run("eval --epochs 10 --seeds 2 --scorers neighboragg,confidence,trustscore --data " + data_ +
                       " --out " + out("e"));
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string metrics = testutil::read_file(dir_ / "e" / "metrics.csv");
  std::istringstream in(metrics);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "scorer,trial,auc,apc,apm,accuracy,n,n_correct,auc_std,apc_std,apm_std,accuracy_std");
  // Three scorers, two trials plus a mean row each.
  EXPECT_EQ(count_lines(metrics), 1u + 3u * 3u);
  EXPECT_NE(metrics.find("trustscore,mean,"), std::string::npos);
  EXPECT_FALSE(testutil::read_file(dir_ / "e" / "scores_confidence_1.csv").empty());
  EXPECT_FALSE(testutil::read_file(dir_ / "e" / "summary_neighboragg.csv").empty());
}

TEST_F(Cli, OracleScorerIsPerfect) {
  const Result r = run("eval --oracle --scorers confidence --data " + data_ + " --out " + out("o"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("oracle auc 100.00"), std::string::npos) << r.out;
}

TEST_F(Cli, DetectModes) {
  const Result r = run("detect --epochs 10 --alpha 0.1 --data " + data_ + " --out " + out("d"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("standard-conformal"), std::string::npos) << r.out;
  const std::string det = testutil::read_file(dir_ / "d" / "detection.csv");
  EXPECT_EQ(count_lines(det), 301u);

  const Result p = run("detect --epochs 10 --alpha 0.1 --noise-rate 0.05 --data " + data_ + " --out " + out("d2"));
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_EQ(p.out.find("standard-conformal"), std::string::npos);

  testutil::write_file(dir_ / "small.csv", [] {
    std::string s = "x,label\n";
    for (int i = 0; i < 100; ++i) s += std::to_string(i) + "," + std::to_string(i % 2) + "\n";
    return s;
  }());
  EXPECT_EQ(run("detect --alpha 0.001 --data " + out("small.csv") + " --out " + out("d3")).code, 2);
}

TEST_F(Cli, VerifyGcn) {
  const Result ok = run("verify-gcn --seeds 20");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("instances 20"), std::string::npos);
  EXPECT_EQ(run("verify-gcn --seeds 0").code, 2);
  const Result bad = run("verify-gcn --seeds 5 --perturb 0.1");
  EXPECT_EQ(bad.code, 5);
  EXPECT_NE(bad.out.find("FAIL instance 0"), std::string::npos) << bad.out;
}

TEST_F(Cli, SynthWithLabelNoiseWritesMask) {
  const Result r = run("synth --kind blobs --n 200 --classes 4 --dim 3 --label-noise 0.1 --out " + out("b.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string mask = testutil::read_file(dir_ / "b_mask.csv");
  EXPECT_EQ(mask.rfind("id,clean_label,flipped\n", 0), 0u);
  EXPECT_EQ(count_lines(mask), 201u);
}

TEST_F(Cli, ConfigFileSetsOptions) {
  testutil::write_file(dir_ / "run.ini", "epochs = 7\nk = 2\ndata = " + data_ + "\nout = " + out("c") + "\n");
  const Result r = run("train --config " + out("run.ini"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(testutil::read_file(dir_ / "c" / "loss_trace.csv")), 9u);
  EXPECT_EQ(testutil::read_file(dir_ / "c" / "model.txt").rfind("2 2 relu\n", 0), 0u);
}

TEST_F(Cli, IdenticalSeedsGiveIdenticalBytes) {
  const std::string common = " --epochs 15 --seeds 2 --seed 11 --scorers neighboragg,temperature --data " + data_;
  ASSERT_EQ(run("eval" + common + " --out " + out("r1")).code, 0);
  ASSERT_EQ(run("eval" + common + " --out " + out("r2")).code, 0);
  EXPECT_EQ(testutil::read_file(dir_ / "r1" / "metrics.csv"), testutil::read_file(dir_ / "r2" / "metrics.csv"));
  ASSERT_EQ(run("train --epochs 15 --seed 11 --data " + data_ + " --out " + out("m1")).code, 0);
  ASSERT_EQ(run("train --epochs 15 --seed 11 --data " + data_ + " --out " + out("m2")).code, 0);
  EXPECT_EQ(testutil::read_file(dir_ / "m1" / "model.txt"), testutil::read_file(dir_ / "m2" / "model.txt"));
}
