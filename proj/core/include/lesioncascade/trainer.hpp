#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "lesioncascade/data.hpp"
#include "lesioncascade/metrics.hpp"
#include "lesioncascade/model.hpp"

namespace lc {

struct TrainConfig {
  int batch_size = 8;
  double base_lr = 1e-3;
  std::int64_t max_iterations = 1500;
  std::int64_t warmup_iterations = 300;  // diagnosis loss weight is 0 until here
  std::uint64_t seed = 42;
  double poly_power = 0.9;
  std::int64_t eval_interval = 150;  // metric rows every this many iterations
  std::int64_t max_extent = 512;
  bool augment = true;
  bool deterministic = false;  // force single-threaded numerics

  void validate() const;
};

struct MetricsRow {
  std::int64_t iteration = 0;  // 1-based, the row is written after the step
  double lr = 0.0;
  double loss = 0.0;     // mean batch loss since the previous row
  double seg_jaccard = 0.0;
  double cls_auc = 0.0;  // NaN when the eval set lacks a class
};

struct TrainResult {
  std::vector<MetricsRow> history;
};

// Dataset-level evaluation. Segmentation scores are averaged per image at
// the original resolution (predictions are cropped out of the padding and
// resized back). Classification uses the final stage's melanoma probability.
struct EvalResult {
  std::int64_t count = 0;
  double seg_jaccard = 0.0;
  double seg_dice = 0.0;
  double seg_accuracy = 0.0;
  double seg_balanced = 0.0;
  double cls_accuracy = 0.0;
  std::optional<double> cls_sensitivity;
  std::optional<double> cls_specificity;
  std::optional<double> cls_auc;  // absent when only one class is present
  RocCurve roc;                   // empty when cls_auc is absent
};

// mask_sink, when set, receives each sample with its predicted original-
// resolution mask (for writing prediction images).
EvalResult evaluate(const CascadeModel& model, const std::vector<Sample>& samples,
                    std::int64_t max_extent = 512,
                    const std::function<void(const Sample&, const BinaryMask&)>& mask_sink = {});

// Single-sample prediction on an arbitrary-size image, mapped back to the
// original frame.
struct Prediction {
  BinaryMask mask;                      // original resolution
  std::vector<StageOutputs> stages;     // raw stage outputs (padded frame)
};
Prediction predict(const CascadeModel& model, const Sample& sample,
                   std::int64_t max_extent = 512);

// Plain SGD with a polynomial learning-rate schedule. Per-sample losses are
// backpropagated with seed 1/batch_size so parameter gradients hold the batch
// mean before each step. Throws TrainingDiverged on a non-finite loss.
TrainResult train(CascadeModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& eval_set, const TrainConfig& config);

}  // namespace lc
