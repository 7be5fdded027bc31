#include "hshseg/hsp.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace hshseg {

double box_iou(const PixelBox& a, const PixelBox& b) {
  const std::int64_t inter = box_intersection_area(a, b);
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Mask largest_component(const Mask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw InvalidArgument("connectivity must be 4 or 8");
  }
  const Eigen::Index rows = mask.rows();
  const Eigen::Index cols = mask.cols();
  Plane<std::int32_t> label = Plane<std::int32_t>::Constant(rows, cols, -1);

  std::int32_t best = -1;
  std::int64_t best_size = 0;
  std::int32_t next = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index r0 = 0; r0 < rows; ++r0) {
    for (Eigen::Index c0 = 0; c0 < cols; ++c0) {
      if (!mask(r0, c0) || label(r0, c0) >= 0) continue;
      const std::int32_t id = next++;
      std::int64_t size = 0;
      label(r0, c0) = id;
      stack.assign(1, {r0, c0});
      while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        ++size;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (connectivity == 4 && dr != 0 && dc != 0)) {
              continue;
            }
            const Eigen::Index rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            if (mask(rr, cc) && label(rr, cc) < 0) {
              label(rr, cc) = id;
              stack.emplace_back(rr, cc);
            }
          }
        }
      }
      // Components are discovered in row-major order of their first pixel,
      // so strict comparison keeps the earliest among equals.
      if (size > best_size) {
        best = id;
        best_size = size;
      }
    }
  }
  if (best < 0) throw EmptyMask("largest component of an empty mask");
  return label == best;
}

std::vector<InstanceMask> prune(std::vector<InstanceMask> instances,
                                const RegionTree& tree,
                                const PruneConfig& cfg) {
  cfg.validate();
  if (instances.empty()) return instances;
  for (const InstanceMask& m : instances) {
    if (m.image_id != instances.front().image_id) {
      throw MixedImages("prune received instances from images '" +
                        instances.front().image_id + "' and '" + m.image_id +
                        "'");
    }
    if (m.mask.rows() != tree.height() || m.mask.cols() != tree.width()) {
      throw DimensionMismatch("instance mask size differs from the tree");
    }
    (void)tree.node(m.node_id);
  }

  for (InstanceMask& m : instances) {
    if (auto box = tight_box(m.mask)) m.bbox = *box;
  }

  // Hierarchy order: lower-level regions first. The trailing fields make the
  // order total so the outcome does not depend on input order.
  const std::size_t n = instances.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto level_key = [&](std::size_t i) {
    const InstanceMask& m = instances[i];
    const RegionNode& node = tree.node(m.node_id);
    return std::make_tuple(node.strength, node.area, node.id, -m.score,
                           m.class_label, m.bbox.x, m.bbox.y,
                           m.bbox.w, m.bbox.h, i);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return level_key(a) < level_key(b);
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;

  std::vector<bool> alive(n);
  for (std::size_t i = 0; i < n; ++i) alive[i] = instances[i].mask.any();

  struct Pair {
    double iou;
    std::size_t lower;
    std::size_t higher;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i]) instances[i].bbox = *tight_box(instances[i].mask);
    }

    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[i] || !alive[j]) continue;
        const double iou = box_iou(instances[i].bbox, instances[j].bbox);
        if (!(iou > cfg.iou_threshold)) continue;
        if (!(instances[i].mask && instances[j].mask).any()) continue;
        const bool i_lower = rank[i] < rank[j];
        pairs.push_back({iou, i_lower ? i : j, i_lower ? j : i});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      return std::pair(rank[a.lower], rank[a.higher]) <
             std::pair(rank[b.lower], rank[b.higher]);
    });

    for (const Pair& p : pairs) {
      Mask& higher = instances[p.higher].mask;
      const Mask& lower = instances[p.lower].mask;
      if (!(higher && lower).any()) continue;
      higher = higher && !lower;
      changed = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (!instances[i].mask.any()) {
        alive[i] = false;
        continue;
      }
      Mask kept = largest_component(instances[i].mask, cfg.connectivity);
      if ((kept != instances[i].mask).any()) {
        instances[i].mask = std::move(kept);
        changed = true;
      }
    }
  }

  std::vector<InstanceMask> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    instances[i].bbox = *tight_box(instances[i].mask);
    out.push_back(std::move(instances[i]));
  }
  return out;
}

}  // namespace hshseg
