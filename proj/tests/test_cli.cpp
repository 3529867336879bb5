// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "syenet/cli.hpp"
#include "syenet/config.hpp"
#include "syenet/image_io.hpp"
#include "syenet/weights.hpp"

using namespace sye;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = sye::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "syenet_test_cli";
  fs::create_directories(dir);
  return (dir / name).string();
}

const std::string kConfig = SYENET_SOURCE_DIR "/configs/sr_x2.cfg";

// training file from a short run, plus its folded counterpart
const std::pair<std::string, std::string>& trained() {
  static const auto paths = [] {
    const auto tr = scratch("train.syw"), fo = scratch("folded.syw");
    const auto r = invoke({"train-toy", "--config", kConfig, "--iters", "3", "--out", tr});
    EXPECT_EQ(r.code, 0) << r.err;
    const auto f = invoke({"reparam", "--config", kConfig, "--weights", tr, "--output", fo});
    EXPECT_EQ(f.code, 0) << f.err;
    return std::pair{tr, fo};
  }();
  return paths;
}

}  // namespace

TEST(Cli, Score) {
  const auto r = invoke({"score", "--psnr", "31.52", "--latency-ms", "16.5", "--c-norm", "1.8e16"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NEAR(std::stod(r.out), 31.928, 0.025 * 31.928);
  const auto r2 = invoke({"score", "--psnr", "30.37", "--latency-ms", "16.5", "--c-norm", "2.5e15"});
  EXPECT_NEAR(std::stod(r2.out), 46.681, 0.005 * 46.681);
}

TEST(Cli, UsageErrors) {
  const auto unknown = invoke({"score", "--psnr", "31", "--latency-ms", "1", "--c-norm", "1", "--bogus"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("score"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"score", "--psnr", "31"}).code, 2);
  EXPECT_EQ(invoke({"analyze-loss", "--alphas", "1", "--p", "3", "--out", scratch("a.csv")}).code, 2);
}

TEST(Cli, ValidationFailuresExitOne) {
  EXPECT_EQ(invoke({"grad-check", "--config", scratch("missing.cfg")}).code, 1);
  EXPECT_EQ(invoke({"analyze-loss", "--alphas", "1,x", "--out", scratch("a.csv")}).code, 1);
}

TEST(Cli, ReparamAndVerify) {
  const auto& [tr, fo] = trained();
  const auto ok = invoke({"verify", "--config", kConfig, "--weights-train", tr, "--weights-folded", fo, "--trials", "3"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);

  // perturb one payload value; the file still parses but no longer matches
  auto bytes = read_file(fo);
  const auto bad = scratch("corrupt.syw");
  bytes[bytes.size() - 2] ^= 0x40;
  write_file(bad, bytes);
  const auto r = invoke({"verify", "--config", kConfig, "--weights-train", tr, "--weights-folded", bad, "--trials", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);

  bytes.resize(bytes.size() / 2);
  write_file(bad, bytes);
  EXPECT_EQ(invoke({"verify", "--config", kConfig, "--weights-train", tr, "--weights-folded", bad}).code, 1);
  // roles swapped
  EXPECT_EQ(invoke({"verify", "--config", kConfig, "--weights-train", fo, "--weights-folded", tr}).code, 1);
  EXPECT_EQ(invoke({"reparam", "--config", kConfig, "--weights", fo, "--output", scratch("x.syw")}).code, 1);
}

TEST(Cli, TrainRefusesFoldedInit) {
  const auto& [tr, fo] = trained();
  const auto before = read_file(fo);
  const auto r = invoke({"train-toy", "--config", kConfig, "--iters", "1", "--init", fo, "--out", scratch("y.syw")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("folded"), std::string::npos);
  EXPECT_EQ(read_file(fo), before);
  const auto resumed =
      invoke({"train-toy", "--config", kConfig, "--iters", "1", "--init", tr, "--out", scratch("z.syw"), "--log",
           scratch("log.csv")});
  EXPECT_EQ(resumed.code, 0) << resumed.err;
  std::ifstream log(scratch("log.csv"));
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "iter,lr,loss,val_psnr");
}

TEST(Cli, InferBothModesAgree) {
  const auto& [tr, fo] = trained();
  Tensor<float> img(Shape{1, 3, 10, 12});
  Rng rng(8);
  rng.fill_uniform(img, 0, 1);
  const auto in = scratch("in.png");
  save_png(in, img, 8);
  const auto a = scratch("out_train.png"), b = scratch("out_fold.png");
  EXPECT_EQ(invoke({"infer", "--config", kConfig, "--weights", tr, "--input", in, "--output", a, "--mode", "training"}).code,
            0);
  EXPECT_EQ(invoke({"infer", "--config", kConfig, "--weights", fo, "--input", in, "--output", b}).code, 0);
  const auto pa = load_png<float>(a).pixels, pb = load_png<float>(b).pixels;
  EXPECT_EQ(pa.shape(), (Shape{1, 3, 20, 24}));
  // same 8-bit quantisation up to one level at rounding boundaries
  EXPECT_LE(max_abs_diff(pa, pb), 1.0 / 255.0 + 1e-6);
  EXPECT_EQ(invoke({"infer", "--config", kConfig, "--weights", fo, "--input", in, "--output", b, "--mode", "training"}).code,
            1);
}

TEST(Cli, AnalyzeLossWritesCsv) {
  const auto path = scratch("fig.csv");
  const auto r = invoke({"analyze-loss", "--alphas", "0.1,1,10", "--p", "1", "--out", path, "--samples", "61"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_GT(lines, 61u);
}

TEST(Cli, GradCheck) {
  const auto r = invoke({"grad-check", "--config", kConfig, "--seed", "1", "--tol", "1e-4"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
