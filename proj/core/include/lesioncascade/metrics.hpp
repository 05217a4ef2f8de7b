#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lesioncascade/morphology.hpp"

namespace lc {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  std::int64_t total() const { return tp + fp + fn + tn; }
};

// Pixel-level counts; masks must have identical dimensions.
ConfusionCounts pixel_confusion(const BinaryMask& predicted, const BinaryMask& truth);

// Case-level counts over 0/1 labels, 1 being the positive class.
ConfusionCounts label_confusion(const std::vector<int>& predicted,
                                const std::vector<int>& truth);

struct SegmentationScores {
  double jaccard = 0.0;
  double dice = 0.0;
  double accuracy = 0.0;
  double balanced = 0.0;  // (sensitivity + specificity) / 2
};

// Set conventions: with an empty prediction and empty truth, jaccard and dice
// are 1. For the balanced score, sensitivity is 1 when there are no positive
// truth pixels and specificity is 1 when there are no negative truth pixels
// (the corresponding error count is necessarily zero in those cases).
SegmentationScores segmentation_scores(const ConfusionCounts& counts);

struct ClassificationScores {
  double accuracy = 0.0;
  std::optional<double> sensitivity;  // absent when no positive cases
  std::optional<double> specificity;  // absent when no negative cases
};

ClassificationScores classification_scores(const ConfusionCounts& counts);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Threshold sweep over the scores, one point per distinct score value plus
// the (0,0) origin; tied scores form a single step so the curve (and the
// trapezoidal area) matches the rank statistic with ties counted half.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Throws std::invalid_argument unless both classes are present.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace lc
