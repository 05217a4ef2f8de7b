#include "lesioncascade/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lesioncascade/ops.hpp"
#include "lesioncascade/optim.hpp"
#include "lesioncascade/parallel.hpp"

namespace lc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (base_lr <= 0.0) throw ConfigError("train: base_lr must be positive");
  if (max_iterations < 1) throw ConfigError("train: max_iterations must be >= 1");
  if (warmup_iterations < 0 || warmup_iterations > max_iterations) {
    throw ConfigError("train: warmup_iterations must lie in [0, max_iterations]");
  }
  if (eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");
  if (max_extent < 32) throw ConfigError("train: max_extent must be at least 32");
}

namespace {

// Crops the padding off a padded-probability plane and maps it back to the
// original resolution.
BinaryMask map_back(const Tensor& probs_full /*[2,H,W]*/, const Preprocessed& pre) {
  const std::int64_t H = probs_full.dim(1);
  const std::int64_t W = probs_full.dim(2);
  const std::int64_t ch = pre.content_height;
  const std::int64_t cw = pre.content_width;
  const auto& v = probs_full.values();
  // Lesion plane is channel 1.
  std::vector<double> plane(static_cast<std::size_t>(ch * cw));
  for (std::int64_t r = 0; r < ch; ++r) {
    for (std::int64_t c = 0; c < cw; ++c) {
      plane[static_cast<std::size_t>(r * cw + c)] =
          v[static_cast<std::size_t>(H * W + r * W + c)];
    }
  }
  Tensor content = Tensor::from_values({1, ch, cw}, std::move(plane));
  if (ch != pre.orig_height || cw != pre.orig_width) {
    content = resize_bilinear(content, pre.orig_height, pre.orig_width);
  }
  return threshold_mask(reshape(content, {pre.orig_height, pre.orig_width}));
}

}  // namespace

Prediction predict(const CascadeModel& model, const Sample& sample,
                   std::int64_t max_extent) {
  NoGradGuard guard;
  const Preprocessed pre = preprocess(sample, max_extent);
  Prediction out;
  out.stages = model.forward(pre.sample.image);
  out.mask = map_back(out.stages.back().seg_probs_full, pre);
  return out;
}

EvalResult evaluate(const CascadeModel& model, const std::vector<Sample>& samples,
                    std::int64_t max_extent,
                    const std::function<void(const Sample&, const BinaryMask&)>& mask_sink) {
  EvalResult result;
  result.count = static_cast<std::int64_t>(samples.size());
  if (samples.empty()) {
    result.seg_jaccard = result.seg_dice = result.seg_accuracy = result.seg_balanced =
        std::numeric_limits<double>::quiet_NaN();
    result.cls_accuracy = std::numeric_limits<double>::quiet_NaN();
    return result;
  }

  double ja = 0.0, di = 0.0, ac = 0.0, gm = 0.0;
  std::vector<int> pred_labels, true_labels;
  std::vector<double> scores;
  pred_labels.reserve(samples.size());
  true_labels.reserve(samples.size());
  scores.reserve(samples.size());

  for (const Sample& sample : samples) {
    const Prediction pred = predict(model, sample, max_extent);
    const SegmentationScores seg =
        segmentation_scores(pixel_confusion(pred.mask, sample.mask));
    ja += seg.jaccard;
    di += seg.dice;
    ac += seg.accuracy;
    gm += seg.balanced;
    if (mask_sink) mask_sink(sample, pred.mask);

    const auto& probs = pred.stages.back().diagnosis.probs.values();
    // argmax, first index winning ties
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
      if (probs[c] > probs[best]) best = c;
    }
    pred_labels.push_back(best == 1 ? 1 : 0);
    true_labels.push_back(sample.label ? 1 : 0);
    scores.push_back(probs[1]);
  }

  const double inv_n = 1.0 / static_cast<double>(samples.size());
  result.seg_jaccard = ja * inv_n;
  result.seg_dice = di * inv_n;
  result.seg_accuracy = ac * inv_n;
  result.seg_balanced = gm * inv_n;

  const ClassificationScores cls =
      classification_scores(label_confusion(pred_labels, true_labels));
  result.cls_accuracy = cls.accuracy;
  result.cls_sensitivity = cls.sensitivity;
  result.cls_specificity = cls.specificity;

  const bool has_pos = std::find(true_labels.begin(), true_labels.end(), 1) != true_labels.end();
  const bool has_neg = std::find(true_labels.begin(), true_labels.end(), 0) != true_labels.end();
  if (has_pos && has_neg) {
    result.roc = roc_curve(scores, true_labels);
    result.cls_auc = result.roc.auc;
  }
  return result;
}

TrainResult train(CascadeModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& eval_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  if (config.deterministic) set_max_threads(1);

  std::vector<Preprocessed> prepared;
  prepared.reserve(train_set.size());
  for (const Sample& s : train_set) prepared.push_back(preprocess(s, config.max_extent));

  Rng shuffle_rng(Rng::mix(config.seed, 0x5f0f));
  const std::uint64_t augment_root = Rng::mix(config.seed, 0xa0a0);

  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  TrainResult result;
  double loss_acc = 0.0;
  std::int64_t loss_rows = 0;
  std::uint64_t draw_ordinal = 0;

  for (std::int64_t it = 0; it < config.max_iterations; ++it) {
    const double lr = poly_lr(it, config.max_iterations, config.base_lr, config.poly_power);
    const double beta = it < config.warmup_iterations ? 0.0 : model.config().beta;
    const double inv_b = 1.0 / static_cast<double>(config.batch_size);

    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b, ++draw_ordinal) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const Preprocessed& pre = prepared[order[cursor++]];
      Sample instance = pre.sample;
      if (config.augment) {
        Rng draw_rng(Rng::mix(augment_root, draw_ordinal));
        instance = augment(instance, draw_rng);
      }
      const std::vector<StageOutputs> stages = model.forward(instance.image);
      const Tensor sample_loss =
          model.loss(stages, mask_to_labels(instance.mask), instance.label, beta);
      batch_loss += sample_loss.item() * inv_b;
      backward(sample_loss, inv_b);
    }

    if (!std::isfinite(batch_loss)) {
      throw TrainingDiverged("non-finite loss at iteration " + std::to_string(it), it);
    }
    sgd_step(model.params(), lr);

    loss_acc += batch_loss;
    ++loss_rows;
    const bool last = it + 1 == config.max_iterations;
    if ((it + 1) % config.eval_interval == 0 || last) {
      const EvalResult eval = evaluate(model, eval_set, config.max_extent);
      MetricsRow row;
      row.iteration = it + 1;
      row.lr = lr;
      row.loss = loss_acc / static_cast<double>(loss_rows);
      row.seg_jaccard = eval.seg_jaccard;
      row.cls_auc = eval.cls_auc.value_or(std::numeric_limits<double>::quiet_NaN());
      result.history.push_back(row);
      loss_acc = 0.0;
      loss_rows = 0;
    }
  }
  return result;
}

}  // namespace lc
