#include "lesioncascade/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lc {

ConfusionCounts pixel_confusion(const BinaryMask& predicted, const BinaryMask& truth) {
  if (!predicted.same_size(truth)) {
    throw std::invalid_argument("pixel_confusion: mask sizes differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.bits.size(); ++i) {
    const bool p = predicted.bits[i] != 0;
    const bool t = truth.bits[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts label_confusion(const std::vector<int>& predicted,
                                const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("label_confusion: label counts differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

SegmentationScores segmentation_scores(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("segmentation_scores: empty confusion");
  SegmentationScores s;
  const std::int64_t overlap_denom = c.tp + c.fn + c.fp;
  s.jaccard = overlap_denom == 0 ? 1.0
                                 : static_cast<double>(c.tp) / static_cast<double>(overlap_denom);
  s.dice = overlap_denom == 0
               ? 1.0
               : static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fn + c.fp);
  s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const double sensitivity =
      c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double specificity =
      c.tn + c.fp == 0 ? 1.0 : static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  s.balanced = 0.5 * (sensitivity + specificity);
  return s;
}

ClassificationScores classification_scores(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("classification_scores: no cases");
  ClassificationScores s;
  s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) {
    s.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (c.tn + c.fp > 0) {
    s.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  }
  return s;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc_curve: score and label counts differ");
  }
  std::int64_t positives = 0, negatives = 0;
  for (int l : labels) (l != 0 ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument(
        "roc_curve: both classes must be present (got " + std::to_string(positives) +
        " positive, " + std::to_string(negatives) + " negative)");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  const double inv_pos = 1.0 / static_cast<double>(positives);
  const double inv_neg = 1.0 / static_cast<double>(negatives);
  std::int64_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] != 0 ? tp : fp) += 1;
      ++i;
    }
    const RocPoint prev = curve.points.back();
    const RocPoint next{static_cast<double>(fp) * inv_neg, static_cast<double>(tp) * inv_pos};
    auc += (next.fpr - prev.fpr) * 0.5 * (next.tpr + prev.tpr);
    curve.points.push_back(next);
  }
  curve.auc = auc;
  return curve;
}

}  // namespace lc
