#include "hshseg/eval.hpp"

#include <algorithm>
#include <vector>

namespace hshseg {

double mask_iou(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("mask sizes differ");
  }
  const auto uni = (a || b).count();
  if (uni == 0) return 0.0;
  return static_cast<double>((a && b).count()) / static_cast<double>(uni);
}

double best_overlap(const GroundTruthInstance& gt,
                    std::span<const InstanceMask> preds, bool class_aware) {
  double best = 0.0;
  for (const InstanceMask& p : preds) {
    if (p.image_id != gt.image_id) continue;
    if (class_aware && p.class_label != gt.class_label) continue;
    best = std::max(best, mask_iou(gt.mask, p.mask));
  }
  return best;
}

double class_mean(const std::map<std::string, double>& per_class) {
  if (per_class.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [cls, v] : per_class) sum += v;
  return sum / static_cast<double>(per_class.size());
}

double instance_weighted_mean(const std::map<std::string, double>& per_class,
                              const std::map<std::string, std::size_t>& counts) {
  double sum = 0.0, weight = 0.0;
  for (const auto& [cls, v] : per_class) {
    const auto it = counts.find(cls);
    const double w = it == counts.end() ? 1.0 : static_cast<double>(it->second);
    sum += w * v;
    weight += w;
  }
  return weight > 0.0 ? sum / weight : 0.0;
}

EvalReport evaluate(std::span<const InstanceMask> preds,
                    std::span<const GroundTruthInstance> gts, bool class_aware,
                    double overlap_threshold) {
  if (gts.empty()) throw NoGroundTruth("evaluation needs ground truth");

  std::map<std::string, std::vector<InstanceMask>> by_image;
  for (const InstanceMask& p : preds) by_image[p.image_id].push_back(p);

  EvalReport report;
  report.overlap_threshold = overlap_threshold;
  std::map<std::string, double> sums;
  std::size_t hits = 0;
  for (const GroundTruthInstance& gt : gts) {
    const auto it = by_image.find(gt.image_id);
    const double best =
        it == by_image.end()
            ? 0.0
            : best_overlap(gt, std::span<const InstanceMask>(it->second),
                           class_aware);
    sums[gt.class_label] += best;
    ++report.instance_counts[gt.class_label];
    if (best >= overlap_threshold) ++hits;
  }
  for (const auto& [cls, sum] : sums) {
    const double mean =
        sum / static_cast<double>(report.instance_counts.at(cls));
    report.per_class_instance[cls] = mean;
    report.per_class_class[cls] = mean;
  }
  report.global_instance =
      instance_weighted_mean(report.per_class_instance, report.instance_counts);
  report.global_class = class_mean(report.per_class_class);
  report.recall_at_half =
      static_cast<double>(hits) / static_cast<double>(gts.size());
  return report;
}

}  // namespace hshseg
