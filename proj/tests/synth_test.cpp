#include <gtest/gtest.h>

#include "hshseg/io.hpp"
#include "hshseg/synth.hpp"
#include "test_util.hpp"

using namespace hshseg;
using namespace hshseg::testing;

TEST(Synth, SeedZeroThreeShapes) {
  SynthConfig cfg;
  cfg.seed = 0;
  const auto scene = make_scene(cfg, "s");
  EXPECT_EQ(scene.ground_truth().size(), 3u);
  EXPECT_EQ(scene.detections.size(), 3u);
  const RegionTree t = tree_from_merges(scene.leaf_labels, scene.merges);
  EXPECT_GE(t.size(), 4u);
}

TEST(Synth, EveryShapeIsATreeNode) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.max_shapes = 6;
    const auto scene = make_scene(cfg, "s");
    const RegionTree t = tree_from_merges(scene.leaf_labels, scene.merges);
    for (std::size_t i = 0; i < scene.detections.size(); ++i) {
      const Mask gt = scene.gt_labels == static_cast<std::uint16_t>(i + 1);
      bool found = false;
      for (std::size_t n = 0; n < t.size() && !found; ++n) {
        found = (mask_by_enumeration(t, static_cast<NodeId>(n)) == gt).all();
      }
      EXPECT_TRUE(found) << "seed " << seed << " shape " << i;
    }
  }
}

TEST(Synth, ExactBoxesWithoutJitter) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const auto scene = make_scene(cfg, "s");
    for (std::size_t i = 0; i < scene.detections.size(); ++i) {
      const auto box = scan_box(scene.gt_labels == static_cast<std::uint16_t>(i + 1));
      ASSERT_TRUE(box);
      EXPECT_EQ(scene.detections[i].box, *box);
      EXPECT_GE(scene.detections[i].score, 0.6);
      EXPECT_LE(scene.detections[i].score, 1.0);
    }
  }
}

TEST(Synth, JitterStaysWithinRadius) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.jitter = 2;
    const auto scene = make_scene(cfg, "s");
    for (std::size_t i = 0; i < scene.detections.size(); ++i) {
      const auto gt = *scan_box(scene.gt_labels == static_cast<std::uint16_t>(i + 1));
      const auto& b = scene.detections[i].box;
      EXPECT_LE(std::abs(b.x - gt.x), 2);
      EXPECT_LE(std::abs(b.y - gt.y), 2);
      EXPECT_LE(std::abs(b.right() - gt.right()), 2);
      EXPECT_LE(std::abs(b.bottom() - gt.bottom()), 2);
      EXPECT_TRUE(b.inside(cfg.width, cfg.height));
    }
  }
}

TEST(Synth, ShapeCountWithinRange) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.min_shapes = 3;
    cfg.max_shapes = 6;
    const auto n = make_scene(cfg, "s").detections.size();
    EXPECT_GE(n, 3u);
    EXPECT_LE(n, 6u);
  }
}

TEST(Synth, WrittenFilesAreDeterministic) {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.jitter = 1;
  const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  const auto fa = write_scene(make_scene(cfg, "x"), a);
  write_scene(make_scene(cfg, "x"), b);
  for (const auto& name : {fa.image, fa.hierarchy, fa.leaf_labels, fa.ucm, fa.gt_labels}) {
    ASSERT_TRUE(std::filesystem::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  cfg.seed = 8;
  const auto c = fresh_dir("synth_c");
  write_scene(make_scene(cfg, "x"), c);
  EXPECT_NE(slurp(a / fa.image), slurp(c / fa.image));
}

TEST(Synth, UcmFileMatchesMergeList) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.max_shapes = 5;
    const auto scene = make_scene(cfg, "u");
    const auto dir = fresh_dir("synth_ucm");
    const auto files = write_scene(scene, dir);
    const RegionTree from_ucm = tree_from_ucm(io::read_ucm(dir / files.ucm));
    const RegionTree from_merges = tree_from_merges(scene.leaf_labels, scene.merges);
    ASSERT_EQ(from_ucm.leaf_count(), from_merges.leaf_count());
    for (const double lambda : from_merges.levels()) {
      std::vector<Mask> a, b;
      for (NodeId id : partition_at(from_merges, lambda)) a.push_back(region_mask(from_merges, id));
      for (NodeId id : partition_at(from_ucm, lambda + 1.0 / 65535)) b.push_back(region_mask(from_ucm, id));
      EXPECT_TRUE((canonical_partition(a, cfg.width, cfg.height) == canonical_partition(b, cfg.width, cfg.height)).all())
          << "seed " << seed << " lambda " << lambda;
    }
  }
}
