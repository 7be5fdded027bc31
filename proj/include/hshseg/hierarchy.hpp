#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hshseg/error.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

/// Ultrametric contour map in doubled-resolution layout: a
/// (2 * height + 1) x (2 * width + 1) grid where (2r + 1, 2c + 1) is pixel
/// (r, c) and the cells between odd coordinates hold boundary strengths.
struct UcmGrid {
  int width = 0;
  int height = 0;
  Plane<double> strengths;
};

/// Contiguous run of leaves in depth-first order; every node's support is
/// exactly the leaves in [begin, end).
struct LeafSpan {
  std::int32_t begin = 0;
  std::int32_t end = 0;
};

struct RegionNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // ascending
  double strength = 0.0;         // merge level; 0 for leaves
  std::int64_t area = 0;
  PixelBox bbox;
  LeafSpan support;

  [[nodiscard]] bool is_leaf() const { return children.empty(); }
};

/// One merge step: `children` fuse into a new node at `strength`.
struct Merge {
  std::vector<NodeId> children;
  double strength = 0.0;
};

/// Immutable region tree. Leaves carry ids [0, leaf_count) matching the
/// values of `leaf_labels`; internal node i is created by merge i - leaf_count.
class RegionTree {
 public:
  /// Maximum size of `levels()`.
  static constexpr std::size_t kMaxLevels = 256;

  [[nodiscard]] int width() const {
    return static_cast<int>(leaf_labels_.cols());
  }
  [[nodiscard]] int height() const {
    return static_cast<int>(leaf_labels_.rows());
  }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] std::size_t leaf_count() const { return leaf_count_; }
  [[nodiscard]] NodeId root() const { return root_; }
  [[nodiscard]] bool contains(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < nodes_.size();
  }

  /// Throws UnknownNode.
  [[nodiscard]] const RegionNode& node(NodeId id) const;
  [[nodiscard]] const std::vector<RegionNode>& nodes() const { return nodes_; }
  [[nodiscard]] const Plane<NodeId>& leaf_labels() const {
    return leaf_labels_;
  }
  /// Sorted distinct merge strengths, uniformly subsampled to kMaxLevels.
  [[nodiscard]] const std::vector<double>& levels() const { return levels_; }

  /// The merge list that rebuilds this tree through tree_from_merges.
  [[nodiscard]] std::vector<Merge> merges() const;

  /// Leaf ids under `id`, in depth-first order.
  [[nodiscard]] std::span<const NodeId> leaves_of(NodeId id) const;

  /// Position of every leaf in the depth-first leaf order.
  [[nodiscard]] const std::vector<std::int32_t>& leaf_rank() const {
    return leaf_rank_;
  }

 private:
  friend RegionTree tree_from_merges(Plane<NodeId> leaf_labels,
                                     std::span<const Merge> merges);

  std::vector<RegionNode> nodes_;
  Plane<NodeId> leaf_labels_;
  std::vector<double> levels_;
  std::vector<NodeId> leaf_order_;
  std::vector<std::int32_t> leaf_rank_;
  std::size_t leaf_count_ = 0;
  NodeId root_ = 0;
};

/// Builds the tree of a UCM: leaves are the 4-connected regions joined by
/// zero-strength boundaries, and regions merge in increasing order of the
/// boundary strength separating them. All merges at one strength level
/// produce a single node per connected group. Throws MalformedGrid.
RegionTree tree_from_ucm(const UcmGrid& grid);

/// Builds a tree from contiguous leaf labels and an explicit merge list.
/// Throws InvalidMergeList.
RegionTree tree_from_merges(Plane<NodeId> leaf_labels,
                            std::span<const Merge> merges);

/// Maximal nodes whose strength is <= lambda, ascending by id.
std::vector<NodeId> partition_at(const RegionTree& tree, double lambda);

/// Binary support of a node. Throws UnknownNode.
Mask region_mask(const RegionTree& tree, NodeId id);

/// Non-root nodes with area >= min_area, ascending by id.
std::vector<NodeId> eligible_nodes(const RegionTree& tree,
                                   std::int64_t min_area);

/// Builds a per-pixel map from a partition: pixel -> index into `regions`.
/// Pixels not covered hold -1.
Plane<std::int32_t> partition_labels(const RegionTree& tree,
                                     std::span<const NodeId> regions);

}  // namespace hshseg

namespace hshseg {

/// Doubled-resolution UCM whose boundary between two pixels is the strength
/// of their lowest common ancestor. Corner cells take the largest adjacent
/// boundary value.
UcmGrid ucm_from_tree(const RegionTree& tree);

}  // namespace hshseg
