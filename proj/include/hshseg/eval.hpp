#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "hshseg/error.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

struct GroundTruthInstance {
  std::string image_id;
  std::string class_label;
  Mask mask;
};

/// Jaccard summary. Values are fractions in [0, 1].
struct EvalReport {
  /// Mean best overlap over each class's ground-truth instances.
  std::map<std::string, double> per_class_instance;
  std::map<std::string, double> per_class_class;
  std::map<std::string, std::size_t> instance_counts;
  /// Instance-count-weighted mean of per_class_instance.
  double global_instance = 0.0;
  /// Unweighted mean of per_class_class.
  double global_class = 0.0;
  /// Fraction of instances whose best overlap reaches overlap_threshold.
  double recall_at_half = 0.0;
  double overlap_threshold = 0.5;
};

/// Pixel IoU. Throws DimensionMismatch.
double mask_iou(const Mask& a, const Mask& b);

/// Best IoU of any prediction on the same image, optionally restricted to
/// the ground truth's class. 0 when nothing qualifies.
double best_overlap(const GroundTruthInstance& gt,
                    std::span<const InstanceMask> preds, bool class_aware);

/// Throws NoGroundTruth.
EvalReport evaluate(std::span<const InstanceMask> preds,
                    std::span<const GroundTruthInstance> gts, bool class_aware,
                    double overlap_threshold = 0.5);

/// Unweighted mean over classes.
double class_mean(const std::map<std::string, double>& per_class);

/// Count-weighted mean; classes missing from `counts` weigh 1.
double instance_weighted_mean(const std::map<std::string, double>& per_class,
                              const std::map<std::string, std::size_t>& counts);

}  // namespace hshseg
