#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hshseg/codes.hpp"
#include "hshseg/hierarchy.hpp"
#include "hshseg/hsp.hpp"
#include "hshseg/lsh.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

using CodeScalar = double;

struct HashParams {
  int bits = 24;
  int tables = 32;
  std::uint64_t seed = 0;
  std::int64_t min_area = 1;
};

struct SegmentParams {
  CodeConfig code;
  HashParams hash;
  PruneConfig prune;
  /// Scan every region when no bucket matches instead of skipping the box.
  bool fallback = true;
  /// Skip matches whose box does not touch the detection box.
  bool require_overlap = false;
};

/// LSH index over the region codes of one image's hierarchy. Item ids are
/// region node ids. Holds a reference to the tree, which must outlive it.
class HshMap {
 public:
  HshMap(LshIndex<CodeScalar> index, const RegionTree& tree, CodeConfig cfg)
      : index_(std::move(index)), tree_(tree), cfg_(cfg) {}

  [[nodiscard]] const LshIndex<CodeScalar>& index() const { return index_; }
  [[nodiscard]] const RegionTree& tree() const { return tree_.get(); }
  [[nodiscard]] const CodeConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t size() const { return index_.size(); }
  [[nodiscard]] NodeId node_of(ItemId id) const {
    if (!index_.codes().contains(id)) {
      throw UnknownNode("item " + std::to_string(id) + " is not indexed");
    }
    return static_cast<NodeId>(id);
  }

 private:
  LshIndex<CodeScalar> index_;
  std::reference_wrapper<const RegionTree> tree_;
  CodeConfig cfg_;
};

/// Indexes the code of every eligible region. Throws EmptyHierarchy.
HshMap build_hsh(const RgbImage& image, const RegionTree& tree,
                 const CodeConfig& cfg, const HashParams& params);

/// Resolves one detection to the region whose code is nearest to the code of
/// the detection box. Throws BoxOutOfBounds, or EmptyCandidates when
/// `fallback` is off and no bucket matches.
InstanceMask segment_box(const HshMap& hsh, const RgbImage& image,
                         const Detection& det, bool fallback = true,
                         bool require_overlap = false);

/// Builds the map once, resolves every detection and prunes the result.
/// Output follows detection order. With fallback off, detections without
/// candidates produce no mask.
std::vector<InstanceMask> segment_image(const RgbImage& image,
                                        const RegionTree& tree,
                                        std::span<const Detection> dets,
                                        const SegmentParams& params);

}  // namespace hshseg
