#include "hshseg/hsh.hpp"

#include <optional>
#include <string>

namespace hshseg {
namespace {

NodeId pick_node(const HshMap& hsh, const ImageCode<CodeScalar>& query,
                 const PixelBox& box, bool fallback, bool require_overlap) {
  const auto& index = hsh.index();
  if (!require_overlap) return hsh.node_of(index.query_nearest(query, fallback).id);

  const auto touches = [&](ItemId id) {
    return box_intersection_area(hsh.tree().node(hsh.node_of(id)).bbox, box) > 0;
  };
  const auto ranked = index.ranked(query, fallback);
  for (const auto& nb : ranked) {
    if (touches(nb.id)) return hsh.node_of(nb.id);
  }
  if (fallback) {
    // No candidate touches the box: look for the nearest region that does.
    std::optional<Neighbor<CodeScalar>> best;
    for (const auto& [id, code] : index.codes()) {
      if (!touches(id)) continue;
      const CodeScalar d = l1_distance(code, query);
      if (!best || d < best->distance) best = Neighbor<CodeScalar>{id, d};
    }
    if (best) return hsh.node_of(best->id);
  }
  return hsh.node_of(ranked.front().id);
}

}  // namespace

HshMap build_hsh(const RgbImage& image, const RegionTree& tree,
                 const CodeConfig& cfg, const HashParams& params) {
  cfg.validate();
  if (tree.width() != image.width() || tree.height() != image.height()) {
    throw DimensionMismatch("hierarchy is " + std::to_string(tree.width()) +
                            "x" + std::to_string(tree.height()) +
                            " but the image is " + std::to_string(image.width()) +
                            "x" + std::to_string(image.height()));
  }
  const auto eligible = eligible_nodes(tree, params.min_area);
  if (eligible.empty()) {
    throw EmptyHierarchy("no hierarchy region has area >= " +
                         std::to_string(params.min_area));
  }
  CodeStore<CodeScalar> codes;
  for (NodeId id : eligible) {
    codes.emplace(static_cast<ItemId>(id),
                  extract_region_code<CodeScalar>(image, tree, id, cfg));
  }
  return HshMap(LshIndex<CodeScalar>::fit(codes, params.bits, params.tables,
                                          params.seed),
                tree, cfg);
}

InstanceMask segment_box(const HshMap& hsh, const RgbImage& image,
                         const Detection& det, bool fallback,
                         bool require_overlap) {
  const auto query = extract_code<CodeScalar>(image, det.box, hsh.config());
  const NodeId node = pick_node(hsh, query, det.box, fallback, require_overlap);
  return {det.image_id, det.class_label, det.score, node,
          region_mask(hsh.tree(), node), hsh.tree().node(node).bbox};
}

std::vector<InstanceMask> segment_image(const RgbImage& image,
                                        const RegionTree& tree,
                                        std::span<const Detection> dets,
                                        const SegmentParams& params) {
  if (dets.empty()) return {};
  for (const Detection& d : dets) {
    if (d.image_id != dets.front().image_id) {
      throw MixedImages("detections reference images '" +
                        dets.front().image_id + "' and '" + d.image_id + "'");
    }
  }
  const HshMap hsh = build_hsh(image, tree, params.code, params.hash);
  std::vector<InstanceMask> selected;
  selected.reserve(dets.size());
  for (const Detection& d : dets) {
    try {
      selected.push_back(
          segment_box(hsh, image, d, params.fallback, params.require_overlap));
    } catch (const EmptyCandidates&) {
      if (params.fallback) throw;
    }
  }
  return prune(std::move(selected), tree, params.prune);
}

}  // namespace hshseg
