#pragma once

#include <vector>

#include "hshseg/error.hpp"
#include "hshseg/hierarchy.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

struct PruneConfig {
  /// Box IoU above which an intersecting pair is pruned.
  double iou_threshold = 0.0;
  /// 4 or 8.
  int connectivity = 4;

  void validate() const {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
      throw InvalidArgument("iou threshold must lie in [0, 1]");
    }
    if (connectivity != 4 && connectivity != 8) {
      throw InvalidArgument("connectivity must be 4 or 8");
    }
  }
};

/// Intersection over union of two boxes in pixel counts.
double box_iou(const PixelBox& a, const PixelBox& b);

/// Largest connected component of a mask. Equal sizes resolve to the
/// component whose first pixel comes first in row-major order.
/// Throws EmptyMask.
Mask largest_component(const Mask& mask, int connectivity);

/// Resolves overlaps between selected regions. For every pair whose mask
/// boxes overlap with IoU above the threshold and whose masks intersect,
/// the lower-level mask's pixels (smaller node strength, then smaller node
/// area, then smaller node id) are removed from the other mask. Each mask is
/// then cut down to its largest connected component. Both steps repeat until
/// nothing changes; empty masks are dropped and survivors keep input order.
/// Throws MixedImages, UnknownNode or DimensionMismatch.
std::vector<InstanceMask> prune(std::vector<InstanceMask> instances,
                                const RegionTree& tree,
                                const PruneConfig& cfg);

}  // namespace hshseg
