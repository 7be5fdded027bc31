#include "hshseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hshseg/io.hpp"
#include "hshseg/random.hpp"

namespace hshseg {
namespace {

enum class ShapeKind { kRectangle, kEllipse, kTriangle };

constexpr std::array<const char*, 3> kShapeNames = {"rectangle", "ellipse", "triangle"};

struct Colour {
  std::uint8_t r, g, b;
  [[nodiscard]] int luma() const { return (299 * r + 587 * g + 114 * b) / 1000; }
};

bool covers(ShapeKind kind, const PixelBox& box, int x, int y) {
  const double px = x + 0.5 - box.x;
  const double py = y + 0.5 - box.y;
  switch (kind) {
    case ShapeKind::kRectangle:
      return true;
    case ShapeKind::kEllipse: {
      const double dx = (px - box.w / 2.0) / (box.w / 2.0);
      const double dy = (py - box.h / 2.0) / (box.h / 2.0);
      return dx * dx + dy * dy <= 1.0;
    }
    case ShapeKind::kTriangle: {
      // Apex at the top centre, base along the bottom row.
      const double half = (py / box.h) * (box.w / 2.0);
      return std::abs(px - box.w / 2.0) <= half + 0.5;
    }
  }
  return false;
}

Colour draw_colour(Rng& rng, const std::vector<Colour>& taken) {
  constexpr int kMinLumaGap = 30;
  Colour best{0, 0, 0};
  int best_gap = -1;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Colour c{static_cast<std::uint8_t>(rng.uniform_index(256)),
                   static_cast<std::uint8_t>(rng.uniform_index(256)),
                   static_cast<std::uint8_t>(rng.uniform_index(256))};
    int gap = 256;
    for (const Colour& t : taken) gap = std::min(gap, std::abs(c.luma() - t.luma()));
    if (gap >= kMinLumaGap) return c;
    if (gap > best_gap) {
      best = c;
      best_gap = gap;
    }
  }
  return best;
}

PixelBox jitter_box(Rng& rng, const PixelBox& box, int radius, int width, int height) {
  if (radius <= 0) return box;
  const auto shift = [&] { return static_cast<int>(rng.uniform_int(-radius, radius)); };
  const int x0 = std::clamp(box.x + shift(), 0, width - 1);
  const int y0 = std::clamp(box.y + shift(), 0, height - 1);
  const int x1 = std::clamp(box.right() - 1 + shift(), x0, width - 1);
  const int y1 = std::clamp(box.bottom() - 1 + shift(), y0, height - 1);
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

}  // namespace

std::vector<GroundTruthInstance> SyntheticScene::ground_truth() const {
  std::vector<GroundTruthInstance> out;
  for (std::size_t i = 0; i < gt_classes.size(); ++i) {
    out.push_back({image_id, gt_classes[i], gt_labels == static_cast<std::uint16_t>(i + 1)});
  }
  return out;
}

SyntheticScene make_scene(const SynthConfig& cfg, const std::string& image_id) {
  if (cfg.width < 32 || cfg.height < 32) throw InvalidArgument("synthetic scenes need at least 32x32 pixels");
  if (cfg.min_shapes < 1 || cfg.max_shapes < cfg.min_shapes) throw InvalidArgument("invalid shape count range");
  if (cfg.background_strips < 1 || cfg.background_strips > cfg.width / 4) {
    throw InvalidArgument("invalid background strip count");
  }
  if (cfg.jitter < 0) throw InvalidArgument("jitter must be non-negative");

  Rng rng(cfg.seed);
  SyntheticScene scene;
  scene.image_id = image_id;
  const int w = cfg.width;
  const int h = cfg.height;

  const Colour background = draw_colour(rng, {});
  std::vector<Colour> colours{background};
  scene.image = RgbImage::filled(w, h, background.r, background.g, background.b);

  // Non-overlapping placements with a 2-pixel gap and a 1-pixel border.
  const auto wanted = static_cast<int>(rng.uniform_int(cfg.min_shapes, cfg.max_shapes));
  const int max_side = std::max(10, std::min(w, h) / 3);
  std::vector<PixelBox> boxes;
  std::vector<ShapeKind> kinds;
  for (int attempt = 0; attempt < 2000 && static_cast<int>(boxes.size()) < wanted; ++attempt) {
    const auto bw = static_cast<int>(rng.uniform_int(10, max_side));
    const auto bh = static_cast<int>(rng.uniform_int(10, max_side));
    const PixelBox box{static_cast<int>(rng.uniform_int(1, w - bw - 1)),
                       static_cast<int>(rng.uniform_int(1, h - bh - 1)), bw, bh};
    const PixelBox grown{box.x - 2, box.y - 2, box.w + 4, box.h + 4};
    const auto kind = static_cast<ShapeKind>(rng.uniform_index(3));
    if (std::any_of(boxes.begin(), boxes.end(),
                    [&](const PixelBox& b) { return box_intersection_area(b, grown) > 0; })) {
      continue;
    }
    boxes.push_back(box);
    kinds.push_back(kind);
  }

  // Background strips take labels [0, strips); shapes follow.
  const int strips = cfg.background_strips;
  scene.leaf_labels.resize(h, w);
  for (int x = 0; x < w; ++x) scene.leaf_labels.col(x).setConstant(x * strips / w);
  scene.gt_labels = Plane<std::uint16_t>::Zero(h, w);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Colour c = draw_colour(rng, colours);
    colours.push_back(c);
    const PixelBox& box = boxes[i];
    for (int y = box.y; y < box.bottom(); ++y) {
      for (int x = box.x; x < box.right(); ++x) {
        if (!covers(kinds[i], box, x, y)) continue;
        scene.image.set(x, y, c.r, c.g, c.b);
        scene.leaf_labels(y, x) = strips + static_cast<NodeId>(i);
        scene.gt_labels(y, x) = static_cast<std::uint16_t>(i + 1);
      }
    }
    scene.gt_classes.emplace_back(kShapeNames[static_cast<std::size_t>(kinds[i])]);
  }

  // Strips merge first at low strengths, then shapes join the background
  // one at a time in random order at increasing strengths.
  const int shape_count = static_cast<int>(boxes.size());
  std::vector<double> strengths;
  const int merge_count = (strips - 1) + shape_count;
  for (int i = 0; i < merge_count; ++i) strengths.push_back(rng.uniform(0.05, 0.95));
  std::sort(strengths.begin(), strengths.end());
  for (int i = 1; i < merge_count; ++i) {
    strengths[static_cast<std::size_t>(i)] = std::max(strengths[static_cast<std::size_t>(i)],
                                                      strengths[static_cast<std::size_t>(i - 1)] + 1e-3);
  }
  std::vector<NodeId> shape_order(static_cast<std::size_t>(shape_count));
  for (int i = 0; i < shape_count; ++i) shape_order[static_cast<std::size_t>(i)] = strips + i;
  for (std::size_t i = shape_order.size(); i > 1; --i) {
    std::swap(shape_order[i - 1], shape_order[rng.uniform_index(i)]);
  }
  const NodeId leaf_count = strips + shape_count;
  NodeId current = 0;
  std::size_t s = 0;
  for (NodeId k = 1; k < strips; ++k) {
    scene.merges.push_back({{current, k}, strengths[s++]});
    current = leaf_count + static_cast<NodeId>(scene.merges.size()) - 1;
  }
  for (NodeId shape : shape_order) {
    scene.merges.push_back({{current, shape}, strengths[s++]});
    current = leaf_count + static_cast<NodeId>(scene.merges.size()) - 1;
  }

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const PixelBox tight = *tight_box(scene.gt_labels == static_cast<std::uint16_t>(i + 1));
    const double score = std::round(rng.uniform(0.6, 1.0) * 1000.0) / 1000.0;
    scene.detections.push_back(
        {image_id, scene.gt_classes[i], score, jitter_box(rng, tight, cfg.jitter, w, h)});
  }
  return scene;
}

SceneFiles write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  const std::string& id = scene.image_id;
  SceneFiles files{id + ".ppm", id + "_hierarchy.json", id + "_leaves.pgm", id + "_ucm.pgm",
                   id + "_gt.pgm"};
  io::atomic_write(dir / files.image, io::encode_ppm(scene.image));
  io::atomic_write(dir / files.leaf_labels,
                   io::encode_pgm(scene.leaf_labels.cast<std::uint16_t>(), 65535));
  io::atomic_write(dir / files.hierarchy, io::encode_hierarchy(files.leaf_labels, scene.merges));
  const RegionTree tree = tree_from_merges(scene.leaf_labels, scene.merges);
  io::atomic_write(dir / files.ucm, io::encode_ucm(ucm_from_tree(tree)));
  io::atomic_write(dir / files.gt_labels, io::encode_pgm(scene.gt_labels, 255));
  return files;
}

}  // namespace hshseg
