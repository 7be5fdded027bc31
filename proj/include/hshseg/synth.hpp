#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hshseg/eval.hpp"
#include "hshseg/hierarchy.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

/// Desk-scale scene generator: flat-colour shapes on a background, with a
/// merge-list hierarchy that contains every shape as a node.
struct SynthConfig {
  std::uint64_t seed = 0;
  int width = 96;
  int height = 96;
  int min_shapes = 3;
  int max_shapes = 3;
  /// Detection box edges move by up to this many pixels.
  int jitter = 0;
  int background_strips = 3;
};

struct SyntheticScene {
  std::string image_id;
  RgbImage image;
  Plane<NodeId> leaf_labels;
  std::vector<Merge> merges;
  /// 0 = background, i + 1 = shape i.
  Plane<std::uint16_t> gt_labels;
  std::vector<std::string> gt_classes;
  /// One per shape, in shape order.
  std::vector<Detection> detections;

  [[nodiscard]] std::vector<GroundTruthInstance> ground_truth() const;
};

SyntheticScene make_scene(const SynthConfig& cfg, const std::string& image_id);

/// Paths written by write_scene, relative to its directory.
struct SceneFiles {
  std::string image;
  std::string hierarchy;
  std::string leaf_labels;
  std::string ucm;
  std::string gt_labels;
};

/// Writes <id>.ppm, <id>_leaves.pgm, <id>_hierarchy.json, <id>_ucm.pgm and
/// <id>_gt.pgm into `dir`.
SceneFiles write_scene(const SyntheticScene& scene,
                       const std::filesystem::path& dir);

}  // namespace hshseg
