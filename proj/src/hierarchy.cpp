#include "hshseg/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace hshseg {
namespace {

/// Union-find whose representative is always the most recently created
/// node of a set.
class NodeForest {
 public:
  explicit NodeForest(std::size_t capacity) { parent_.reserve(capacity); }

  NodeId add() {
    parent_.push_back(static_cast<NodeId>(parent_.size()));
    return parent_.back();
  }

  NodeId find(NodeId x) {
    NodeId root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const NodeId next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  void attach(NodeId child, NodeId parent) { parent_[child] = parent; }

 private:
  std::vector<NodeId> parent_;
};

class PixelUnion {
 public:
  explicit PixelUnion(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::vector<double> subsample_levels(std::vector<double> levels) {
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() <= RegionTree::kMaxLevels) return levels;
  std::vector<double> out;
  out.reserve(RegionTree::kMaxLevels);
  const std::size_t last = levels.size() - 1;
  for (std::size_t i = 0; i < RegionTree::kMaxLevels; ++i) {
    const std::size_t at =
        (i * last + (RegionTree::kMaxLevels - 1) / 2) /
        (RegionTree::kMaxLevels - 1);
    out.push_back(levels[at]);
  }
  return out;
}

}  // namespace

const RegionNode& RegionTree::node(NodeId id) const {
  if (!contains(id)) {
    throw UnknownNode("unknown region node " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

std::vector<Merge> RegionTree::merges() const {
  std::vector<Merge> out;
  out.reserve(nodes_.size() - leaf_count_);
  for (std::size_t i = leaf_count_; i < nodes_.size(); ++i) {
    out.push_back({nodes_[i].children, nodes_[i].strength});
  }
  return out;
}

std::span<const NodeId> RegionTree::leaves_of(NodeId id) const {
  const LeafSpan s = node(id).support;
  return std::span<const NodeId>(leaf_order_).subspan(
      static_cast<std::size_t>(s.begin), static_cast<std::size_t>(s.end - s.begin));
}

RegionTree tree_from_merges(Plane<NodeId> leaf_labels,
                            std::span<const Merge> merges) {
  if (leaf_labels.size() == 0) {
    throw InvalidMergeList("leaf label map is empty");
  }
  if (leaf_labels.minCoeff() < 0) {
    throw InvalidMergeList("leaf labels must be non-negative");
  }
  const auto leaf_count = static_cast<std::size_t>(leaf_labels.maxCoeff()) + 1;

  RegionTree tree;
  tree.leaf_count_ = leaf_count;
  tree.nodes_.resize(leaf_count);

  std::vector<int> x0(leaf_count, INT32_MAX), y0(leaf_count, INT32_MAX);
  std::vector<int> x1(leaf_count, -1), y1(leaf_count, -1);
  for (Eigen::Index r = 0; r < leaf_labels.rows(); ++r) {
    for (Eigen::Index c = 0; c < leaf_labels.cols(); ++c) {
      const auto l = static_cast<std::size_t>(leaf_labels(r, c));
      ++tree.nodes_[l].area;
      x0[l] = std::min(x0[l], static_cast<int>(c));
      x1[l] = std::max(x1[l], static_cast<int>(c));
      y0[l] = std::min(y0[l], static_cast<int>(r));
      y1[l] = std::max(y1[l], static_cast<int>(r));
    }
  }
  for (std::size_t l = 0; l < leaf_count; ++l) {
    RegionNode& n = tree.nodes_[l];
    if (n.area == 0) {
      throw InvalidMergeList("leaf labels are not contiguous: label " +
                             std::to_string(l) + " is unused");
    }
    n.id = static_cast<NodeId>(l);
    n.bbox = {x0[l], y0[l], x1[l] - x0[l] + 1, y1[l] - y0[l] + 1};
  }

  double previous = 0.0;
  for (std::size_t m = 0; m < merges.size(); ++m) {
    const Merge& merge = merges[m];
    const auto id = static_cast<NodeId>(tree.nodes_.size());
    const std::string where = "merge " + std::to_string(m) + ": ";
    if (merge.children.size() < 2) {
      throw InvalidMergeList(where + "needs at least two children");
    }
    if (!std::isfinite(merge.strength) || merge.strength < 0.0 ||
        merge.strength > 1.0) {
      throw InvalidMergeList(where + "strength outside [0, 1]");
    }
    if (merge.strength < previous) {
      throw InvalidMergeList(where + "strengths must be non-decreasing");
    }
    previous = merge.strength;

    RegionNode n;
    n.id = id;
    n.strength = merge.strength;
    n.children = merge.children;
    std::sort(n.children.begin(), n.children.end());
    bool first = true;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      const NodeId c = n.children[i];
      if (c < 0 || c >= id) {
        throw InvalidMergeList(where + "dangling child id " + std::to_string(c));
      }
      if (i > 0 && c == n.children[i - 1]) {
        throw InvalidMergeList(where + "duplicate child id " + std::to_string(c));
      }
      RegionNode& child = tree.nodes_[static_cast<std::size_t>(c)];
      if (child.parent) {
        throw InvalidMergeList(where + "child " + std::to_string(c) +
                               " was already merged");
      }
      if (!(merge.strength > child.strength)) {
        throw InvalidMergeList(where + "strength must exceed child " +
                               std::to_string(c) + "'s strength");
      }
      child.parent = id;
      n.area += child.area;
      n.bbox = first ? child.bbox : box_union(n.bbox, child.bbox);
      first = false;
    }
    tree.nodes_.push_back(std::move(n));
  }

  std::vector<NodeId> roots;
  for (const RegionNode& n : tree.nodes_) {
    if (!n.parent) roots.push_back(n.id);
  }
  if (roots.size() != 1) {
    throw InvalidMergeList("merge list leaves " + std::to_string(roots.size()) +
                           " roots; expected exactly one");
  }
  tree.root_ = roots.front();

  // Depth-first leaf order so that each node's support is a contiguous span.
  tree.leaf_order_.reserve(leaf_count);
  std::vector<std::pair<NodeId, std::size_t>> stack{{tree.root_, 0}};
  while (!stack.empty()) {
    auto& [id, next_child] = stack.back();
    RegionNode& n = tree.nodes_[static_cast<std::size_t>(id)];
    if (next_child == 0) {
      n.support.begin = static_cast<std::int32_t>(tree.leaf_order_.size());
      if (n.is_leaf()) tree.leaf_order_.push_back(id);
    }
    if (next_child < n.children.size()) {
      const NodeId child = n.children[next_child++];
      stack.emplace_back(child, 0);
      continue;
    }
    n.support.end = static_cast<std::int32_t>(tree.leaf_order_.size());
    stack.pop_back();
  }
  tree.leaf_rank_.assign(leaf_count, 0);
  for (std::size_t i = 0; i < tree.leaf_order_.size(); ++i) {
    tree.leaf_rank_[static_cast<std::size_t>(tree.leaf_order_[i])] =
        static_cast<std::int32_t>(i);
  }

  std::vector<double> strengths;
  for (std::size_t i = leaf_count; i < tree.nodes_.size(); ++i) {
    strengths.push_back(tree.nodes_[i].strength);
  }
  tree.levels_ = subsample_levels(std::move(strengths));
  tree.leaf_labels_ = std::move(leaf_labels);
  return tree;
}

RegionTree tree_from_ucm(const UcmGrid& grid) {
  if (grid.width < 1 || grid.height < 1) {
    throw MalformedGrid("UCM image dimensions must be positive");
  }
  const Eigen::Index rows = 2 * static_cast<Eigen::Index>(grid.height) + 1;
  const Eigen::Index cols = 2 * static_cast<Eigen::Index>(grid.width) + 1;
  if (grid.strengths.rows() != rows || grid.strengths.cols() != cols) {
    throw MalformedGrid("UCM grid must be (2H+1)x(2W+1) = " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", got " + std::to_string(grid.strengths.rows()) + "x" +
                        std::to_string(grid.strengths.cols()));
  }
  if (!grid.strengths.allFinite() || grid.strengths.minCoeff() < 0.0 ||
      grid.strengths.maxCoeff() > 1.0) {
    throw MalformedGrid("UCM strengths must lie in [0, 1]");
  }

  const int w = grid.width;
  const int h = grid.height;
  const auto pixel = [w](int r, int c) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(w) +
           static_cast<std::size_t>(c);
  };
  const auto right_strength = [&](int r, int c) {
    return grid.strengths(2 * r + 1, 2 * c + 2);
  };
  const auto down_strength = [&](int r, int c) {
    return grid.strengths(2 * r + 2, 2 * c + 1);
  };

  PixelUnion pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w && right_strength(r, c) == 0.0) {
        pixels.unite(pixel(r, c), pixel(r, c + 1));
      }
      if (r + 1 < h && down_strength(r, c) == 0.0) {
        pixels.unite(pixel(r, c), pixel(r + 1, c));
      }
    }
  }

  // Leaves are numbered in row-major order of their first pixel.
  Plane<NodeId> labels(h, w);
  std::vector<NodeId> label_of_root(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  NodeId next_label = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      NodeId& l = label_of_root[pixels.find(pixel(r, c))];
      if (l < 0) l = next_label++;
      labels(r, c) = l;
    }
  }

  struct Edge {
    double strength;
    NodeId a;
    NodeId b;
  };
  std::vector<Edge> edges;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w && labels(r, c) != labels(r, c + 1)) {
        edges.push_back({right_strength(r, c), labels(r, c), labels(r, c + 1)});
      }
      if (r + 1 < h && labels(r, c) != labels(r + 1, c)) {
        edges.push_back({down_strength(r, c), labels(r, c), labels(r + 1, c)});
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.strength < y.strength;
  });

  const auto leaf_count = static_cast<std::size_t>(next_label);
  NodeForest forest(2 * leaf_count);
  for (std::size_t i = 0; i < leaf_count; ++i) forest.add();

  std::vector<Merge> merges;
  for (std::size_t begin = 0; begin < edges.size();) {
    std::size_t end = begin;
    while (end < edges.size() && edges[end].strength == edges[begin].strength) {
      ++end;
    }
    const double level = edges[begin].strength;

    // Group current regions connected by edges at this level.
    std::map<NodeId, NodeId> group;
    const auto group_find = [&group](NodeId x) {
      while (group.at(x) != x) x = group.at(x);
      return x;
    };
    for (std::size_t e = begin; e < end; ++e) {
      const NodeId a = forest.find(edges[e].a);
      const NodeId b = forest.find(edges[e].b);
      if (a == b) continue;
      group.try_emplace(a, a);
      group.try_emplace(b, b);
      const NodeId ra = group_find(a);
      const NodeId rb = group_find(b);
      if (ra != rb) group[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::map<NodeId, std::vector<NodeId>> members;
    for (const auto& [id, unused] : group) members[group_find(id)].push_back(id);

    // Keys are the minimum member ids, so this visits groups in ascending
    // (min child id) order.
    for (auto& [min_id, children] : members) {
      const NodeId parent = forest.add();
      for (NodeId c : children) forest.attach(c, parent);
      merges.push_back({std::move(children), level});
    }
    begin = end;
  }

  return tree_from_merges(std::move(labels), merges);
}

std::vector<NodeId> partition_at(const RegionTree& tree, double lambda) {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{tree.root()};
  while (!stack.empty()) {
    const RegionNode& n = tree.node(stack.back());
    stack.pop_back();
    if (n.strength <= lambda || n.is_leaf()) {
      out.push_back(n.id);
    } else {
      stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Mask region_mask(const RegionTree& tree, NodeId id) {
  const LeafSpan span = tree.node(id).support;
  const auto& rank = tree.leaf_rank();
  return tree.leaf_labels().unaryExpr([&](NodeId leaf) {
    const std::int32_t at = rank[static_cast<std::size_t>(leaf)];
    return at >= span.begin && at < span.end;
  });
}

std::vector<NodeId> eligible_nodes(const RegionTree& tree,
                                   std::int64_t min_area) {
  if (min_area < 1) throw InvalidArgument("min_area must be >= 1");
  std::vector<NodeId> out;
  for (const RegionNode& n : tree.nodes()) {
    if (n.id != tree.root() && n.area >= min_area) out.push_back(n.id);
  }
  return out;
}

Plane<std::int32_t> partition_labels(const RegionTree& tree,
                                     std::span<const NodeId> regions) {
  std::vector<std::int32_t> region_of_rank(tree.leaf_count(), -1);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const LeafSpan s = tree.node(regions[i]).support;
    for (std::int32_t r = s.begin; r < s.end; ++r) {
      region_of_rank[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(i);
    }
  }
  const auto& rank = tree.leaf_rank();
  return tree.leaf_labels().unaryExpr([&](NodeId leaf) {
    return region_of_rank[static_cast<std::size_t>(
        rank[static_cast<std::size_t>(leaf)])];
  });
}

}  // namespace hshseg

namespace hshseg {

UcmGrid ucm_from_tree(const RegionTree& tree) {
  const int w = tree.width();
  const int h = tree.height();
  UcmGrid grid{w, h, Plane<double>::Zero(2 * h + 1, 2 * w + 1)};
  const auto& labels = tree.leaf_labels();
  const auto& rank = tree.leaf_rank();
  const auto separation = [&](NodeId a, NodeId b) {
    if (a == b) return 0.0;
    const std::int32_t target = rank[static_cast<std::size_t>(b)];
    const RegionNode* n = &tree.node(a);
    while (target < n->support.begin || target >= n->support.end) {
      n = &tree.node(*n->parent);
    }
    return n->strength;
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w) grid.strengths(2 * r + 1, 2 * c + 2) = separation(labels(r, c), labels(r, c + 1));
      if (r + 1 < h) grid.strengths(2 * r + 2, 2 * c + 1) = separation(labels(r, c), labels(r + 1, c));
    }
  }
  for (int r = 2; r < 2 * h; r += 2) {
    for (int c = 2; c < 2 * w; c += 2) {
      grid.strengths(r, c) = std::max({grid.strengths(r - 1, c), grid.strengths(r + 1, c),
                                       grid.strengths(r, c - 1), grid.strengths(r, c + 1)});
    }
  }
  return grid;
}

}  // namespace hshseg
