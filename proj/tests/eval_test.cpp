#include <gtest/gtest.h>

#include "hshseg/eval.hpp"
#include "test_util.hpp"

using namespace hshseg;
using namespace hshseg::testing;

namespace {

Mask rect(int w, int h, const PixelBox& b) {
  Mask m = Mask::Constant(h, w, false);
  m.block(b.y, b.x, b.h, b.w).setConstant(true);
  return m;
}

InstanceMask pred(const std::string& image, const std::string& cls, const Mask& m) {
  return {image, cls, 0.9, 0, m, *tight_box(m)};
}

/// A prediction whose IoU with `gt` is exactly `n` / 100, built by keeping
/// the first n of its 100 pixels.
Mask prefix_of(const Mask& gt, int n) {
  Mask m = Mask::Constant(gt.rows(), gt.cols(), false);
  int kept = 0;
  for (int y = 0; y < gt.rows() && kept < n; ++y) {
    for (int x = 0; x < gt.cols() && kept < n; ++x) {
      if (gt(y, x)) {
        m(y, x) = true;
        ++kept;
      }
    }
  }
  return m;
}

}  // namespace

TEST(MaskIou, Examples) {
  const Mask a = rect(4, 4, {0, 0, 2, 2});
  EXPECT_EQ(mask_iou(a, a), 1.0);
  EXPECT_EQ(mask_iou(a, rect(4, 4, {2, 2, 2, 2})), 0.0);
  EXPECT_EQ(mask_iou(a, rect(4, 4, {0, 0, 2, 1})), 0.5);
  EXPECT_THROW(mask_iou(a, rect(5, 4, {0, 0, 1, 1})), DimensionMismatch);
}

TEST(BestOverlap, Examples) {
  const Mask gt = rect(10, 10, {0, 0, 10, 10});
  const GroundTruthInstance g{"img", "cat", gt};
  EXPECT_EQ(best_overlap(g, {}, true), 0.0);
  const std::vector<InstanceMask> preds{pred("img", "cat", prefix_of(gt, 30)), pred("img", "cat", prefix_of(gt, 60))};
  EXPECT_DOUBLE_EQ(best_overlap(g, preds, true), 0.6);
  const std::vector<InstanceMask> exact{pred("img", "cat", gt)};
  EXPECT_EQ(best_overlap(g, exact, true), 1.0);
  const std::vector<InstanceMask> wrong_class{pred("img", "dog", gt)};
  EXPECT_EQ(best_overlap(g, wrong_class, true), 0.0);
  EXPECT_EQ(best_overlap(g, wrong_class, false), 1.0);
  const std::vector<InstanceMask> wrong_image{pred("other", "cat", gt)};
  EXPECT_EQ(best_overlap(g, wrong_image, false), 0.0);
}

TEST(BestOverlap, AddingPredictionsNeverLowersIt) {
  Rng rng(1);
  const Mask gt = rect(12, 12, {2, 2, 6, 7});
  const GroundTruthInstance g{"img", "a", gt};
  std::vector<InstanceMask> preds;
  double prev = 0.0;
  for (int i = 0; i < 30; ++i) {
    const int x = static_cast<int>(rng.uniform_int(0, 8)), y = static_cast<int>(rng.uniform_int(0, 8));
    preds.push_back(pred("img", "a", rect(12, 12, {x, y, static_cast<int>(rng.uniform_int(1, 12 - x)),
                                                    static_cast<int>(rng.uniform_int(1, 12 - y))})));
    const double now = best_overlap(g, preds, true);
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(Evaluate, WeightedAndUnweightedMeans) {
  const Mask full = rect(10, 10, {0, 0, 10, 10});
  std::vector<GroundTruthInstance> gts{{"i1", "a", full}, {"i2", "b", full}, {"i3", "b", full}, {"i4", "b", full}};
  std::vector<InstanceMask> preds{pred("i1", "a", full), pred("i2", "b", prefix_of(full, 50)),
                                  pred("i3", "b", prefix_of(full, 50)), pred("i4", "b", prefix_of(full, 50))};
  const auto r = evaluate(preds, gts, true);
  EXPECT_DOUBLE_EQ(r.global_class, 0.75);
  EXPECT_DOUBLE_EQ(r.global_instance, 0.625);
  EXPECT_DOUBLE_EQ(r.per_class_class.at("b"), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class_instance.at("b"), 0.5);
  EXPECT_EQ(r.instance_counts.at("b"), 3u);
  EXPECT_DOUBLE_EQ(r.recall_at_half, 1.0);
}

TEST(Evaluate, PerfectPredictions) {
  Rng rng(2);
  std::vector<GroundTruthInstance> gts;
  std::vector<InstanceMask> preds;
  for (int i = 0; i < 8; ++i) {
    const Mask m = rect(16, 16, {static_cast<int>(rng.uniform_int(0, 8)), static_cast<int>(rng.uniform_int(0, 8)), 4, 5});
    const std::string cls = i % 3 == 0 ? "x" : "y";
    gts.push_back({"img" + std::to_string(i / 2), cls, m});
    preds.push_back(pred("img" + std::to_string(i / 2), cls, m));
  }
  const auto r = evaluate(preds, gts, true);
  EXPECT_EQ(r.global_class, 1.0);
  EXPECT_EQ(r.global_instance, 1.0);
  EXPECT_EQ(r.recall_at_half, 1.0);
  for (const auto& [c, v] : r.per_class_class) EXPECT_EQ(v, 1.0);
}

TEST(Evaluate, EmptyPredictionsGiveZeros) {
  const std::vector<GroundTruthInstance> gts{{"img", "a", rect(4, 4, {0, 0, 2, 2})}};
  const auto r = evaluate({}, gts, true);
  EXPECT_EQ(r.global_class, 0.0);
  EXPECT_EQ(r.global_instance, 0.0);
  EXPECT_EQ(r.recall_at_half, 0.0);
  EXPECT_THROW(evaluate({}, {}, true), NoGroundTruth);
}

TEST(Evaluate, RecallFallsAsThresholdRises) {
  Rng rng(3);
  const Mask full = rect(10, 10, {0, 0, 10, 10});
  std::vector<GroundTruthInstance> gts;
  std::vector<InstanceMask> preds;
  for (int i = 0; i < 40; ++i) {
    gts.push_back({"img" + std::to_string(i), "a", full});
    preds.push_back(pred("img" + std::to_string(i), "a", prefix_of(full, static_cast<int>(rng.uniform_int(1, 100)))));
  }
  const double r3 = evaluate(preds, gts, true, 0.3).recall_at_half;
  const double r5 = evaluate(preds, gts, true, 0.5).recall_at_half;
  const double r7 = evaluate(preds, gts, true, 0.7).recall_at_half;
  EXPECT_GE(r3, r5);
  EXPECT_GE(r5, r7);
  EXPECT_GT(r3, r7);
}

TEST(Evaluate, OrderInvariant) {
  Rng rng(4);
  std::vector<GroundTruthInstance> gts;
  std::vector<InstanceMask> preds;
  for (int i = 0; i < 12; ++i) {
    const std::string img = "img" + std::to_string(i % 3);
    const std::string cls = std::string(1, static_cast<char>('a' + i % 4));
    const int x = static_cast<int>(rng.uniform_int(0, 6)), y = static_cast<int>(rng.uniform_int(0, 6));
    gts.push_back({img, cls, rect(12, 12, {x, y, 5, 5})});
    preds.push_back(pred(img, cls, rect(12, 12, {static_cast<int>(rng.uniform_int(0, 6)), y, 6, 4})));
  }
  const auto a = evaluate(preds, gts, true);
  std::reverse(gts.begin(), gts.end());
  std::rotate(preds.begin(), preds.begin() + 5, preds.end());
  const auto b = evaluate(preds, gts, true);
  EXPECT_EQ(a.global_class, b.global_class);
  EXPECT_EQ(a.global_instance, b.global_instance);
  EXPECT_EQ(a.recall_at_half, b.recall_at_half);
  EXPECT_EQ(a.per_class_class, b.per_class_class);
}

TEST(Aggregation, PublishedClassRow) {
  const std::vector<double> row{33.3, 18.5, 48.1, 37.5, 40.7, 45.1, 39.4, 59.9, 23.3, 51.0,
                                43.3, 60.4, 39.8, 43.1, 34.6, 37.2, 51.0, 47.0, 53.6, 54.2};
  std::map<std::string, double> per_class;
  for (std::size_t i = 0; i < row.size(); ++i) per_class["c" + std::to_string(i)] = row[i];
  EXPECT_NEAR(class_mean(per_class), 43.05, 0.005);
}

TEST(Aggregation, InstanceRowPlainMeanDiffersFromPublishedGlobal) {
  const std::vector<double> row{45.4, 27.5, 55.9, 44.2, 42.0, 43.2, 41.3, 66.3, 31.4, 57.2,
                                42.3, 63.3, 43.8, 43.6, 40.9, 40.6, 57.2, 51.2, 48.0, 54.1};
  std::map<std::string, double> per_class;
  for (std::size_t i = 0; i < row.size(); ++i) per_class["c" + std::to_string(i)] = row[i];
  EXPECT_NEAR(class_mean(per_class), 46.97, 0.005);
  EXPECT_GT(std::abs(class_mean(per_class) - 45.2), 1.0);
}

TEST(Aggregation, WeightedMean) {
  const std::map<std::string, double> v{{"a", 1.0}, {"b", 0.5}};
  EXPECT_DOUBLE_EQ(instance_weighted_mean(v, {{"a", 1}, {"b", 3}}), 0.625);
  EXPECT_DOUBLE_EQ(instance_weighted_mean(v, {}), 0.75);
  EXPECT_EQ(class_mean({}), 0.0);
}
