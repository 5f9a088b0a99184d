#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "iqals/digest.hpp"
#include "iqals/distort.hpp"
#include "iqals/iqa.hpp"
#include "iqals/report.hpp"
#include "png_io.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace iqals;
namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string cmd = std::string("env -u IQALS_DATA ") + IQALS_CLI_PATH + " " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = iqals::testing::scratch_dir(std::string("cli-") + info->name());
    data_ = dir_ / "data";
    out_ = dir_ / "out";
    iqals::testing::write_synthetic_cifar(data_, 6, 12);
  }
  Outcome run(const std::string& args) { return cli(args, dir_); }
  std::string paths() const { return "--data " + data_.string() + " --out " + out_.string(); }

  fs::path dir_, data_, out_;
};

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  const auto bad = run("train " + paths() + " --strategy 10");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("9: IQA-LS / MIX_all3"), std::string::npos) << bad.err;
  EXPECT_EQ(run("train " + paths() + " --set contrast=2").code, 1);
  EXPECT_EQ(run("prep --out " + out_.string()).code, 1);  // no dataset location
  const auto version = run("--version");
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.out.find("iqals"), std::string::npos);
}

TEST_F(Cli, PrepWritesTenSetsReproducibly) {
  const auto r = run("prep " + paths() + " --workers 1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("effective configuration"), std::string::npos);
  int manifests = 0;
  for (const auto& e : fs::directory_iterator(out_ / "testsets"))
    manifests += e.path().extension() == ".jsonl";
  EXPECT_EQ(manifests, 10);
  EXPECT_TRUE(fs::exists(out_ / "dataset.sha256"));
  const auto first = sha256_file(out_ / "testsets" / "noise-3.jsonl");
  const auto index = slurp(out_ / "testsets" / "index.tsv");
  ASSERT_EQ(run("prep " + paths() + " --workers 2").code, 0);
  EXPECT_EQ(sha256_file(out_ / "testsets" / "noise-3.jsonl"), first);
  EXPECT_EQ(slurp(out_ / "testsets" / "index.tsv"), index);
}

TEST_F(Cli, PrepRejectsDigestMismatchNamingTheFile) {
  {
    std::ofstream sums(dir_ / "sums");
    for (const char* f : kCifarTrainFiles) sums << sha256_file(data_ / f) << "  " << f << "\n";
    sums << std::string(64, '0') << "  " << kCifarTestFile << "\n";
  }
  const auto r = run("prep " + paths() + " --digests " + (dir_ / "sums").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("test_batch.bin"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingDatasetIsADataError) {
  EXPECT_EQ(run("prep --data " + (dir_ / "nope").string() + " --out " + out_.string()).code, 2);
  fs::resize_file(data_ / "data_batch_3.bin", 3073 * 2 + 5);
  const auto r = run("train " + paths() + " --epochs 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("data_batch_3.bin"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainEvalReportEndToEnd) {
  ASSERT_EQ(run("prep " + paths() + " --test-limit 10").code, 0);
  const auto missing = run("eval " + paths() + " --strategy 2");
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find("strategy 2: Original / MIX_blur"), std::string::npos) << missing.err;
  EXPECT_NE(run("report " + paths() + " --strategy 2").code, 0);

  const auto t = run("train " + paths() + " --strategy 1,3 --epochs 1 --workers 1");
  ASSERT_EQ(t.code, 0) << t.err;
  for (const char* run_name : {"s1-seed0", "s3-seed0"}) {
    const auto dir = out_ / "runs" / run_name;
    int checkpoints = 0;
    for (const auto& e : fs::directory_iterator(dir)) checkpoints += e.path().filename().string().starts_with("ckpt-epoch-");
    EXPECT_EQ(checkpoints, 1) << run_name;
    const auto log = slurp(dir / "train_log.tsv");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2) << log;
  }
  EXPECT_TRUE(fs::exists(out_ / "runs" / "s3-seed0" / "mixture-epoch-00001.jsonl"));

  const auto e = run("eval " + paths() + " --strategy 1,3 --probe-count 4");
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("| 3 | IQA-LS | MIX_blur |"), std::string::npos) << e.out;
  const auto eval_tsv = slurp(out_ / "eval" / "s3-seed0" / "eval.tsv");
  EXPECT_NE(eval_tsv.find("checkpoint ckpt-epoch-00001.bin sha256 "), std::string::npos) << eval_tsv;

  const auto r = run("report " + paths() + " --strategy 1,3 --formats csv --confidence");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("1,Original,Pristine,"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("strategy\tkind\tlevel0"), std::string::npos);
  const auto csv = parse_delimited(slurp(out_ / "grid.csv"));
  EXPECT_EQ(csv.cell_count(), 20u);
  EXPECT_FALSE(csv.provenance.empty());
}

TEST_F(Cli, ScoreAndDistortPassthroughs) {
  const auto ref = dir_ / "ref.png";
  tools::write_png(ref, iqals::testing::textured_image(3));
  const auto self = run("score --ref " + ref.string() + " --dist " + ref.string());
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_EQ(self.out, "raw 1.000000\ntransformed 1.000000\n");

  const auto blurred = dir_ / "blur.png";
  const auto d = run("distort --input " + ref.string() + " --output " + blurred.string() +
                     " --kind blur --level 2");
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(tools::read_png(blurred),
            apply(DistortionSpec::at_level(DistortionKind::kBlur, 2), iqals::testing::textured_image(3), 0));
  const auto s = run("score --ref " + ref.string() + " --dist " + blurred.string());
  ASSERT_EQ(s.code, 0);
  const auto q = ssim(iqals::testing::textured_image(3), tools::read_png(blurred));
  char expect[80];
  std::snprintf(expect, sizeof expect, "raw %.6f\ntransformed %.6f\n", q.raw, q.transformed);
  EXPECT_EQ(s.out, expect);

  EXPECT_EQ(run("distort --input " + ref.string() + " --output x.png --kind contrast").code, 1);
  EXPECT_EQ(run("distort --input " + ref.string() + " --output x.png --kind blur --level 4").code, 1);
  EXPECT_EQ(run("score --ref " + (dir_ / "none.png").string() + " --dist " + ref.string()).code, 2);
}

}  // namespace
