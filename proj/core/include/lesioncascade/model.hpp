#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lesioncascade/dgff.hpp"
#include "lesioncascade/lpse.hpp"
#include "lesioncascade/nn.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

enum class Precision { kFloat64 };

Precision parse_precision(const std::string& name);

struct ModelConfig {
  int input_channels = 3;
  std::array<int, 5> block_channels{16, 32, 64, 128, 256};
  int num_stages = 3;
  int seg_classes = 2;
  int cls_classes = 2;
  double beta = 0.3;  // classification loss weight
  Precision precision = Precision::kFloat64;
  bool use_lpse = true;   // off: classify global average pooled features instead
  bool use_dgff = true;   // off: stages pass their input features through
  bool share_stage_params = false;
  bool supervise_all_stages = true;  // off: loss on the final stage only
  bool per_channel_mix = false;      // rank-1 mix weights in the fusion block

  int feature_channels() const { return block_channels[2]; }
  void validate() const;
};

struct StageOutputs {
  Tensor seg_scores;      // [2,h,w] at feature resolution
  Tensor seg_probs;       // [2,h,w] softmax of the scores
  Tensor seg_probs_full;  // [2,H,W] upsampled and renormalized
  DiagnosisProbs diagnosis;
  LesionDescriptor descriptor;  // undefined when use_lpse is off
  Tensor features_out;          // [K,h,w] input features of the next stage
};

// Recursive segmentation/recognition cascade. Every stage segments the
// incoming features, classifies the lesion from region statistics of those
// features, and hands recalibrated features to the next stage. At init the
// fusion block is an exact pass-through, so all stages see identical
// features until the first optimizer step.
class CascadeModel {
 public:
  CascadeModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // image: [input_channels, H, W] with H and W divisible by 32.
  std::vector<StageOutputs> forward(const Tensor& image) const;

  // Backbone taps b1..b5, each halving the spatial size.
  std::array<Tensor, 5> backbone_forward(const Tensor& image) const;

  // 1x1-projects taps 3..5 to the feature width, upsamples to the tap-3 grid,
  // sums, and applies a relu (keeping fused features non-negative, which the
  // pass-through property of the stages at init relies on).
  Tensor fuse_skip_features(const Tensor& b3, const Tensor& b4, const Tensor& b5) const;

  // One cascade step on [K,h,w] features; full_h/full_w give the resolution
  // for the upsampled probability map.
  StageOutputs stage_forward(const Tensor& features, int stage, std::int64_t full_h,
                             std::int64_t full_w) const;

  // Sum over supervised stages of the per-pixel segmentation loss plus
  // beta times the diagnosis loss. beta = 0 skips the diagnosis term.
  Tensor loss(const std::vector<StageOutputs>& stages,
              const std::vector<std::int64_t>& seg_labels, int cls_label,
              double beta) const;

 private:
  struct StageParams {
    Tensor seg_weight, seg_bias;
    Tensor cls_weight, cls_bias;  // descriptor classifier or gap classifier
    DgffParams dgff;
  };

  const StageParams& stage_params(int stage) const;

  ModelConfig config_;
  ParameterStore params_;
  struct BlockParams {
    Tensor down_weight, down_bias;  // stride-2 2x2, exact halving
    Tensor keep_weight, keep_bias;  // stride-1 3x3
  };
  std::array<BlockParams, 5> blocks_;
  Tensor proj3_weight_, proj3_bias_;
  Tensor proj4_weight_, proj4_bias_;
  Tensor proj5_weight_, proj5_bias_;
  std::vector<StageParams> stages_;
};

}  // namespace lc
