#include <gtest/gtest.h>

#include "hshseg/eval.hpp"
#include "hshseg/io.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace hshseg;
using namespace hshseg::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = HSHSEG_CLI;
const fs::path kData = HSHSEG_TEST_DATA;

int cli(const std::string& args) { return run(kCli + " " + args); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// One synthetic scene in `dir`: scenes.json, gt.json, detections.jsonl.
void synth(const fs::path& dir, int seed, const std::string& extra = "") {
  ASSERT_EQ(cli("synth --seed " + std::to_string(seed) + " --out " + q(dir) + " " + extra), 0);
}

json scene(const fs::path& dir, std::size_t i = 0) {
  return json::parse(slurp(dir / "scenes.json")).at("scenes").at(i);
}

std::string single_scene_args(const fs::path& dir) {
  const json s = scene(dir);
  return "--image " + q(dir / s.at("image").get<std::string>()) + " --hierarchy " +
         q(dir / s.at("hierarchy").get<std::string>()) + " --detections " + q(dir / "detections.jsonl");
}

std::string table_line(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(prefix, 0) == 0) return line;
  }
  return {};
}

std::string last_cell(const std::string& line) {
  std::istringstream in(line);
  std::string cell, last;
  while (in >> cell) last = cell;
  return last;
}

}  // namespace

TEST(CliSegment, SyntheticSceneReproducesGroundTruth) {
  const auto dir = fresh_dir("cli_seg");
  synth(dir, 0);
  ASSERT_EQ(cli("segment --seed 1 " + single_scene_args(dir) + " --out " + q(dir / "out")), 0);
  const auto preds = io::read_predictions(dir / "out" / "manifest.json");
  const auto gts = io::read_ground_truth(dir / "gt.json");
  ASSERT_EQ(preds.size(), gts.size());
  for (const auto& g : gts) EXPECT_GE(best_overlap(g, preds, true), 0.99);
  for (const auto& e : io::read_manifest(dir / "out" / "manifest.json")) {
    const Mask m = io::read_mask(dir / "out" / e.mask_path);
    EXPECT_TRUE(m.any());
    EXPECT_EQ(*tight_box(m), e.bbox);
  }
}

TEST(CliSegment, UcmInputWorks) {
  const auto dir = fresh_dir("cli_ucm");
  synth(dir, 3);
  const json s = scene(dir);
  ASSERT_EQ(cli("segment --seed 1 --image " + q(dir / s.at("image").get<std::string>()) + " --ucm " +
                q(dir / s.at("ucm").get<std::string>()) + " --detections " + q(dir / "detections.jsonl") +
                " --out " + q(dir / "out")),
            0);
  const auto preds = io::read_predictions(dir / "out" / "manifest.json");
  for (const auto& g : io::read_ground_truth(dir / "gt.json")) EXPECT_GE(best_overlap(g, preds, true), 0.99);
}

TEST(CliSegment, ScoreThresholdCanEmptyTheRun) {
  const auto dir = fresh_dir("cli_empty");
  synth(dir, 0);
  ASSERT_EQ(cli("segment --seed 1 --score-threshold 1.01 " + single_scene_args(dir) + " --out " + q(dir / "out")),
            1);
  ASSERT_EQ(cli("segment --seed 1 --score-threshold 1.0 " + single_scene_args(dir) + " --out " + q(dir / "out")), 0);
  const json m = json::parse(slurp(dir / "out" / "manifest.json"));
  for (const auto& e : m.at("instances")) EXPECT_EQ(e.at("score").get<double>(), 1.0);

  std::ofstream(dir / "none.jsonl").close();
  const json s = scene(dir);
  ASSERT_EQ(cli("segment --seed 1 --image " + q(dir / s.at("image").get<std::string>()) + " --hierarchy " +
                q(dir / s.at("hierarchy").get<std::string>()) + " --detections " + q(dir / "none.jsonl") +
                " --out " + q(dir / "out2")),
            0);
  EXPECT_TRUE(json::parse(slurp(dir / "out2" / "manifest.json")).at("instances").empty());
}

TEST(CliSegment, ExitCodes) {
  const auto dir = fresh_dir("cli_exit");
  synth(dir, 0);
  const json s = scene(dir);
  const std::string image = " --image " + q(dir / s.at("image").get<std::string>());
  const std::string dets = " --detections " + q(dir / "detections.jsonl");
  EXPECT_EQ(cli("segment --seed 1" + image + " --ucm " + q(dir / "missing.pgm") + dets + " --out " + q(dir / "o")), 1);
  EXPECT_EQ(cli("segment" + single_scene_args(dir) + " --out " + q(dir / "o")), 1);
  EXPECT_EQ(cli("segment --seed 1 --grid 1 " + single_scene_args(dir) + " --out " + q(dir / "o")), 1);
  EXPECT_EQ(cli("segment --seed 1 --bogus " + single_scene_args(dir) + " --out " + q(dir / "o")), 1);

  io::atomic_write(dir / "flat_leaves.pgm", io::encode_pgm(Plane<std::uint16_t>::Zero(96, 96), 65535));
  io::atomic_write(dir / "flat.json", io::encode_hierarchy("flat_leaves.pgm", {}));
  EXPECT_EQ(cli("segment --seed 1" + image + " --hierarchy " + q(dir / "flat.json") + dets + " --out " + q(dir / "o")),
            2);
  EXPECT_EQ(cli("segment --seed 1 --min-area 100000 " + single_scene_args(dir) + " --out " + q(dir / "o")), 2);
}

TEST(CliSegment, ConfigFileAndOverrides) {
  const auto dir = fresh_dir("cli_config");
  synth(dir, 2);
  io::atomic_write(dir / "run.cfg", "# run settings\nseed = 5\nbits = 8\ntables = 4\nscore_threshold = 1.0\n");
  ASSERT_EQ(cli("segment --config " + q(dir / "run.cfg") + " " + single_scene_args(dir) + " --out " + q(dir / "a")), 0);
  const auto from_config = json::parse(slurp(dir / "a" / "manifest.json")).at("instances").size();
  ASSERT_EQ(cli("segment --config " + q(dir / "run.cfg") + " --score-threshold 0 " + single_scene_args(dir) +
                " --out " + q(dir / "b")),
            0);
  EXPECT_LT(from_config, json::parse(slurp(dir / "b" / "manifest.json")).at("instances").size());
  io::atomic_write(dir / "bad.cfg", "seed = 5\nnot_a_key = 1\n");
  EXPECT_EQ(cli("segment --config " + q(dir / "bad.cfg") + " " + single_scene_args(dir) + " --out " + q(dir / "c")), 1);
}

TEST(CliSegment, BatchAndJobsAgree) {
  const auto dir = fresh_dir("cli_batch");
  synth(dir, 9, "--count 4 --max-shapes 5 --jitter 2");
  const std::string base = "segment --seed 3 --batch " + q(dir / "scenes.json") + " --detections " +
                           q(dir / "detections.jsonl");
  ASSERT_EQ(cli(base + " --out " + q(dir / "one")), 0);
  ASSERT_EQ(cli(base + " --jobs 3 --out " + q(dir / "three")), 0);
  EXPECT_EQ(slurp(dir / "one" / "manifest.json"), slurp(dir / "three" / "manifest.json"));
  for (const auto& e : io::read_manifest(dir / "one" / "manifest.json")) {
    EXPECT_EQ(slurp(dir / "one" / e.mask_path), slurp(dir / "three" / e.mask_path));
  }
}

TEST(CliEval, PerfectPredictionsScoreHundred) {
  const auto dir = fresh_dir("cli_eval");
  synth(dir, 4, "--count 2");
  ASSERT_EQ(cli("segment --seed 1 --batch " + q(dir / "scenes.json") + " --detections " +
                q(dir / "detections.jsonl") + " --out " + q(dir / "out")),
            0);
  ASSERT_EQ(cli("eval --predictions " + q(dir / "out" / "manifest.json") + " --gt " + q(dir / "gt.json") +
                " --out " + q(dir / "report")),
            0);
  const json r = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(r.at("global_class").get<double>(), 1.0);
  EXPECT_EQ(r.at("global_instance").get<double>(), 1.0);
  const std::string text = slurp(dir / "report.txt");
  EXPECT_EQ(last_cell(table_line(text, "Instance Level")), "100.0");
  EXPECT_EQ(last_cell(table_line(text, "Class Level")), "100.0");
  EXPECT_EQ(last_cell(table_line(text, "Recall")), "100.0");
}

TEST(CliEval, EmptyManifestScoresZero) {
  const auto dir = fresh_dir("cli_eval_empty");
  synth(dir, 4);
  io::atomic_write(dir / "empty.json", io::encode_manifest({}));
  ASSERT_EQ(cli("eval --predictions " + q(dir / "empty.json") + " --gt " + q(dir / "gt.json") + " --out " +
                q(dir / "report")),
            0);
  const std::string text = slurp(dir / "report.txt");
  EXPECT_EQ(last_cell(table_line(text, "Instance Level")), "0.0");
  EXPECT_EQ(last_cell(table_line(text, "Class Level")), "0.0");
}

TEST(CliEval, PublishedTableFixture) {
  const auto dir = fresh_dir("cli_eval_table");
  ASSERT_EQ(cli("eval --precomputed " + q(kData / "voc_val_table.json") + " --out " + q(dir / "report")), 0);
  const std::string text = slurp(dir / "report.txt");
  EXPECT_EQ(last_cell(table_line(text, "Class Level")), "43.1");
  EXPECT_NEAR(json::parse(slurp(dir / "report.json")).at("global_class").get<double>(), 0.4305, 0.00005);
}

TEST(CliEval, MismatchedImagesFail) {
  const auto dir = fresh_dir("cli_eval_mis");
  synth(dir, 4);
  Mask m = Mask::Constant(96, 96, false);
  m.block(0, 0, 4, 4).setConstant(true);
  io::atomic_write(dir / "other_0.pgm", io::encode_mask(m));
  io::atomic_write(dir / "manifest.json", io::encode_manifest({{"other", "shape", 0.9, 1, {0, 0, 4, 4}, "other_0.pgm"}}));
  EXPECT_EQ(cli("eval --predictions " + q(dir / "manifest.json") + " --gt " + q(dir / "gt.json") + " --out " +
                q(dir / "report")),
            1);
}

TEST(CliSegment, DetectionsForUnknownImageFail) {
  const auto dir = fresh_dir("cli_unknown_image");
  synth(dir, 4);
  EXPECT_EQ(cli("segment --seed 1 " + single_scene_args(dir) + " --image-id other --out " + q(dir / "out")), 1);
}

TEST(CliSynth, SameSeedSameBytes) {
  const auto a = fresh_dir("cli_synth_a"), b = fresh_dir("cli_synth_b");
  synth(a, 11, "--count 2 --jitter 2");
  synth(b, 11, "--count 2 --jitter 2");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_GT(files, 5u);
  EXPECT_EQ(cli("synth --out " + q(a)), 1);
}

TEST(CliIndexStats, ReportsBuckets) {
  const auto dir = fresh_dir("cli_stats");
  synth(dir, 0);
  const json s = scene(dir);
  const std::string args = "index-stats --seed 2 --bits 4 --tables 3 --image " +
                           q(dir / s.at("image").get<std::string>()) + " --hierarchy " +
                           q(dir / s.at("hierarchy").get<std::string>());
  const std::string cmd = kCli + " " + args + " --json --save-index " + q(dir / "index.bin") + " > " + q(dir / "stats.json");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const json stats = json::parse(slurp(dir / "stats.json"));
  EXPECT_EQ(stats.at("tables").get<int>(), 3);
  EXPECT_TRUE(fs::exists(dir / "index.bin"));
  EXPECT_EQ(slurp(dir / "index.bin").substr(0, 8), "HSHLSHIX");
}
