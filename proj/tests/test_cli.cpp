#include <gtest/gtest.h>

#include <json.hpp>

#include "echoseg/cli.hpp"
#include "echoseg/dataset.hpp"
#include "echoseg/image_io.hpp"
#include "echoseg/metrics.hpp"
#include "echoseg/pipeline.hpp"
#include "echoseg/serialization.hpp"
#include "test_util.hpp"

using namespace echoseg;
using echoseg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "echoseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

std::size_t count_files(const fs::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().string().ends_with(suffix);
  return n;
}

// A small dataset and a model trained on it, shared by the read-only commands.
class TrainedFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli_fixture");
    ASSERT_EQ(run({"synth", "--out", (*dir_ / "data").string(), "--count", "5", "--size", "16x16", "--seed", "1"}), 0);
    ASSERT_EQ(run({"train", "--data", (*dir_ / "data").string(), "--model", "vanilla", "--epochs", "1", "--depth",
                   "2", "--base", "4", "--test-count", "1", "--out", (*dir_ / "m.ckpt").string(), "--quiet"}),
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path data() { return *dir_ / "data"; }
  static fs::path ckpt() { return *dir_ / "m.ckpt"; }
  static TempDir* dir_;
};
TempDir* TrainedFixture::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"train", "--data", "x"}), 2);
  EXPECT_EQ(run({"synth", "--out", "x", "--size", "12by12"}), 2);
  EXPECT_EQ(run({"train", "--data", "x", "--out", "y", "--model", "resnet"}), 2);
}

TEST(Cli, SynthIsDeterministic) {
  TempDir dir("cli_synth");
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(run({"synth", "--out", a.string(), "--count", "3", "--size", "32x32", "--seed", "7"}), 0);
  ASSERT_EQ(run({"synth", "--out", b.string(), "--count", "3", "--size", "32x32", "--seed", "7"}), 0);
  EXPECT_EQ(count_files(a / "images", ".pgm"), 3u);
  EXPECT_EQ(count_files(a / "masks", ".pgm"), 3u);
  for (const auto& e : fs::directory_iterator(a / "images")) {
    EXPECT_EQ(read_file(e.path()), read_file(b / "images" / e.path().filename()));
  }
  const auto samples = load_dataset(a);
  EXPECT_EQ(samples[0].height(), 32u);
}

TEST(Cli, SynthWarnsButWritesIndivisibleSize) {
  TempDir dir("cli_warn");
  ::testing::internal::CaptureStderr();
  const int code = run({"synth", "--out", dir.path().string(), "--count", "1", "--size", "100x100"});
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 0);
  EXPECT_NE(err.find("warning"), std::string::npos);
  EXPECT_EQ(count_files(dir / "images", ".pgm"), 1u);
}

TEST(Cli, TrainWritesReportAndCheckpoint) {
  TempDir dir("cli_train");
  ASSERT_EQ(run({"synth", "--out", (dir / "d").string(), "--count", "4", "--size", "16x16"}), 0);
  ASSERT_EQ(run({"train", "--data", (dir / "d").string(), "--model", "matae", "--lambda", "0", "--epochs", "2",
                 "--depth", "2", "--base", "4", "--test-count", "1", "--out", (dir / "m.ckpt").string(),
                 "--report", (dir / "r.json").string(), "--quiet"}),
            0);
  const auto report = read_json(dir / "r.json");
  EXPECT_EQ(report["command"], "train");
  EXPECT_EQ(report["config"]["lambda"], 0.0);
  const auto& epochs = report["result"]["epochs"];
  ASSERT_EQ(epochs.size(), 2u);
  EXPECT_EQ(epochs[1]["epoch"], 2);
  EXPECT_TRUE(epochs[1].contains("test_metrics"));
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.kind, ModelKind::matae);
  EXPECT_EQ(ck.epoch, 2u);

  // Resuming to epoch 3 runs exactly one more epoch.
  ASSERT_EQ(run({"train", "--data", (dir / "d").string(), "--epochs", "3", "--test-count", "1", "--resume",
                 (dir / "m.ckpt").string(), "--out", (dir / "m3.ckpt").string(), "--report",
                 (dir / "r3.json").string(), "--quiet"}),
            0);
  EXPECT_EQ(read_json(dir / "r3.json")["result"]["epochs"].size(), 1u);
  EXPECT_EQ(load_checkpoint(dir / "m3.ckpt").epoch, 3u);

  EXPECT_EQ(run({"train", "--data", (dir / "d").string(), "--test-count", "4", "--out", (dir / "x").string()}), 2);
}

TEST_F(TrainedFixture, EvalReportMatchesLibrary) {
  TempDir dir("cli_eval");
  ASSERT_EQ(run({"eval", "--data", data().string(), "--ckpt", ckpt().string(), "--report", (dir / "e.json").string()}), 0);
  const auto report = read_json(dir / "e.json");
  const auto expected = evaluate(restore_model(load_checkpoint(ckpt())), load_dataset(data()));
  EXPECT_EQ(report["result"]["mean_iou"].get<double>(), expected.mean_iou);
  EXPECT_EQ(report["result"]["mean_dice"].get<double>(), expected.mean_dice);
  EXPECT_EQ(report["result"]["n_images"], 5);
  EXPECT_EQ(report["tool"], "echoseg");
}

TEST_F(TrainedFixture, EvalFailures) {
  TempDir empty("cli_empty");
  fs::create_directories(empty / "images");
  fs::create_directories(empty / "masks");
  EXPECT_EQ(run({"eval", "--data", empty.path().string(), "--ckpt", ckpt().string()}), 1);
  TempDir junk("cli_junk");
  write_file(junk / "bad.ckpt", "nonsense");
  EXPECT_EQ(run({"eval", "--data", data().string(), "--ckpt", (junk / "bad.ckpt").string()}), 1);
}

TEST_F(TrainedFixture, PredictWritesMasksAndOverlays) {
  TempDir dir("cli_predict");
  ASSERT_EQ(run({"predict", "--ckpt", ckpt().string(), "--images", (data() / "images").string(), "--out",
                 dir.path().string(), "--overlay"}),
            0);
  EXPECT_EQ(count_files(dir.path(), "_overlay.ppm"), 5u);
  EXPECT_EQ(count_files(dir.path(), ".pgm"), 5u);
  const GrayImage m = read_pgm(dir / "phantom_00000.pgm");
  EXPECT_EQ(m.width, 16u);
  for (auto p : m.pixels) EXPECT_TRUE(p == 0 || p == 255);
}

TEST_F(TrainedFixture, PredictRejectsIndivisibleImage) {
  TempDir dir("cli_predict_bad");
  fs::create_directories(dir / "in");
  write_pgm(dir.path() / "in" / "odd.pgm", GrayImage{10, 10, std::vector<std::uint8_t>(100, 50)});
  EXPECT_EQ(run({"predict", "--ckpt", ckpt().string(), "--images", (dir / "in").string(), "--out",
                 (dir / "out").string()}),
            1);
}

TEST_F(TrainedFixture, Bench) {
  TempDir dir("cli_bench");
  EXPECT_EQ(run({"bench", "--ckpt", ckpt().string(), "--data", data().string(), "--reps", "2"}), 2);
  ASSERT_EQ(run({"bench", "--ckpt", ckpt().string(), "--data", data().string(), "--reps", "3", "--report",
                 (dir / "b.json").string()}),
            0);
  const auto result = read_json(dir / "b.json")["result"];
  EXPECT_EQ(result["repetitions"], 3);
  EXPECT_GE(result["mean_inference_seconds"].get<double>(), 0.0);
}

TEST(Cli, Gradcheck) {
  TempDir dir("cli_grad");
  ASSERT_EQ(run({"gradcheck", "--report", (dir / "g.json").string()}), 0);
  const auto result = read_json(dir / "g.json")["result"];
  EXPECT_TRUE(result["all_passed"].get<bool>());
  EXPECT_GE(result["n_ops"].get<int>(), 8);
  EXPECT_EQ(run({"gradcheck", "--module", "tensor", "--inject-fault"}), 1);
}
