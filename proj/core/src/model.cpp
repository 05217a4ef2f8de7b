#include "lesioncascade/model.hpp"

#include "lesioncascade/ops.hpp"
#include "lesioncascade/random.hpp"

namespace lc {

Precision parse_precision(const std::string& name) {
  if (name == "float64") return Precision::kFloat64;
  throw ConfigError("precision '" + name + "' is not supported; this build stores float64");
}

void ModelConfig::validate() const {
  if (input_channels < 1) throw ConfigError("model: input_channels must be >= 1");
  for (int c : block_channels) {
    if (c < 1) throw ConfigError("model: block channel widths must be >= 1");
  }
  if (num_stages < 1) throw ConfigError("model: num_stages must be >= 1");
  if (seg_classes != 2) throw ConfigError("model: segmentation is binary (seg_classes == 2)");
  if (cls_classes < 2) throw ConfigError("model: cls_classes must be >= 2");
  if (beta < 0.0) throw ConfigError("model: beta must be >= 0");
}

namespace {

Tensor conv_chw(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  Tensor batched = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  Tensor y = conv2d(batched, w, b, stride, padding);
  return reshape(y, {y.dim(1), y.dim(2), y.dim(3)});
}

// Constant copy of one channel plane; the segmentation mask handed to the
// region split is a non-differentiable input by construction.
Tensor detach_plane(const Tensor& chw, std::int64_t channel) {
  const std::int64_t H = chw.dim(1);
  const std::int64_t W = chw.dim(2);
  const std::int64_t P = H * W;
  const auto& v = chw.values();
  std::vector<double> plane(v.begin() + static_cast<std::ptrdiff_t>(channel * P),
                            v.begin() + static_cast<std::ptrdiff_t>((channel + 1) * P));
  return Tensor::from_values({H, W}, std::move(plane));
}

}  // namespace

CascadeModel::CascadeModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);

  const int K = config_.feature_channels();
  const int C = config_.cls_classes;

  auto conv_param = [&](const std::string& name, int out_c, int in_c, int k) {
    Tensor w = params_.create(name + ".weight", {out_c, in_c, k, k});
    init_he_uniform(w, static_cast<std::int64_t>(in_c) * k * k, rng);
    Tensor b = params_.create(name + ".bias", {out_c});
    return std::pair<Tensor, Tensor>(w, b);
  };

  int in_c = config_.input_channels;
  for (int i = 0; i < 5; ++i) {
    const int out_c = config_.block_channels[static_cast<std::size_t>(i)];
    const std::string prefix = "backbone.b" + std::to_string(i + 1);
    auto [dw, db] = conv_param(prefix + ".down", out_c, in_c, 2);
    auto [kw, kb] = conv_param(prefix + ".keep", out_c, out_c, 3);
    blocks_[static_cast<std::size_t>(i)] = {dw, db, kw, kb};
    in_c = out_c;
  }

  auto proj_param = [&](const std::string& name, int src_c) {
    return conv_param(name, K, src_c, 1);
  };
  std::tie(proj3_weight_, proj3_bias_) = proj_param("fuse.proj3", config_.block_channels[2]);
  std::tie(proj4_weight_, proj4_bias_) = proj_param("fuse.proj4", config_.block_channels[3]);
  std::tie(proj5_weight_, proj5_bias_) = proj_param("fuse.proj5", config_.block_channels[4]);

  const int stage_param_sets = config_.share_stage_params ? 1 : config_.num_stages;
  for (int t = 0; t < stage_param_sets; ++t) {
    const std::string prefix =
        config_.share_stage_params ? std::string("stage.shared") : "stage" + std::to_string(t);
    StageParams sp;
    std::tie(sp.seg_weight, sp.seg_bias) = conv_param(prefix + ".seg", config_.seg_classes, K, 1);
    // The diagnosis readout starts at zero so its logits reflect only what
    // training has accumulated; a random projection of the descriptor would
    // otherwise dominate the small learned component for a long time.
    const int desc_dim = config_.use_lpse ? 4 * K : K;
    sp.cls_weight = params_.create(prefix + ".cls.weight", {C, desc_dim});
    sp.cls_bias = params_.create(prefix + ".cls.bias", {C});
    if (config_.use_dgff) {
      sp.dgff.gate_weight = params_.create(prefix + ".fusion.gate.weight", {K, K + C});
      init_he_uniform(sp.dgff.gate_weight, K + C, rng);
      sp.dgff.gate_bias = params_.create(prefix + ".fusion.gate.bias", {K});
      const Shape mix_shape = config_.per_channel_mix ? Shape{K} : Shape{};
      sp.dgff.mix_gated = params_.create(prefix + ".fusion.mix_gated", mix_shape);
      sp.dgff.mix_identity = params_.create(prefix + ".fusion.mix_identity", mix_shape);
      for (double& v : sp.dgff.mix_identity.values()) v = 1.0;
      sp.dgff.refine1_weight = params_.create(prefix + ".fusion.refine1.weight", {K, K, 3, 3});
      init_identity_conv(sp.dgff.refine1_weight);
      sp.dgff.refine1_bias = params_.create(prefix + ".fusion.refine1.bias", {K});
      sp.dgff.refine2_weight = params_.create(prefix + ".fusion.refine2.weight", {K, K, 3, 3});
      init_identity_conv(sp.dgff.refine2_weight);
      sp.dgff.refine2_bias = params_.create(prefix + ".fusion.refine2.bias", {K});
    }
    stages_.push_back(sp);
  }
}

const CascadeModel::StageParams& CascadeModel::stage_params(int stage) const {
  return stages_[config_.share_stage_params ? 0 : static_cast<std::size_t>(stage)];
}

std::array<Tensor, 5> CascadeModel::backbone_forward(const Tensor& image) const {
  detail::require_defined(image, "backbone_forward");
  if (image.rank() != 3 || image.dim(0) != config_.input_channels) {
    throw ShapeError("backbone_forward: expected [" + std::to_string(config_.input_channels) +
                     ",H,W] input, got " + shape_str(image.shape()));
  }
  if (image.dim(1) % 32 != 0 || image.dim(2) % 32 != 0) {
    throw ShapeError("backbone_forward: spatial size " + shape_str(image.shape()) +
                     " must be divisible by 32");
  }
  std::array<Tensor, 5> taps;
  Tensor x = image;
  for (int i = 0; i < 5; ++i) {
    const BlockParams& bp = blocks_[static_cast<std::size_t>(i)];
    Tensor down = relu(conv_chw(x, bp.down_weight, bp.down_bias, /*stride=*/2, /*padding=*/0));
    Tensor keep = relu(conv_chw(down, bp.keep_weight, bp.keep_bias, /*stride=*/1, /*padding=*/1));
    taps[static_cast<std::size_t>(i)] = keep;
    x = keep;
  }
  return taps;
}

Tensor CascadeModel::fuse_skip_features(const Tensor& b3, const Tensor& b4,
                                        const Tensor& b5) const {
  const std::int64_t h = b3.dim(1);
  const std::int64_t w = b3.dim(2);
  Tensor p3 = conv_chw(b3, proj3_weight_, proj3_bias_, 1, 0);
  Tensor p4 = upsample_bilinear(conv_chw(b4, proj4_weight_, proj4_bias_, 1, 0), h, w);
  Tensor p5 = upsample_bilinear(conv_chw(b5, proj5_weight_, proj5_bias_, 1, 0), h, w);
  return relu(add(add(p3, p4), p5));
}

StageOutputs CascadeModel::stage_forward(const Tensor& features, int stage,
                                         std::int64_t full_h, std::int64_t full_w) const {
  if (stage < 0 || stage >= config_.num_stages) {
    throw ConfigError("stage_forward: stage index out of range");
  }
  const StageParams& sp = stage_params(stage);

  StageOutputs out;
  out.seg_scores = conv_chw(features, sp.seg_weight, sp.seg_bias, 1, 0);
  out.seg_probs = softmax(out.seg_scores, /*axis=*/0);
  // Per-class bilinear upsampling does not keep the channel sum at exactly
  // one, hence the renormalization.
  out.seg_probs_full = normalize_channels(upsample_bilinear(out.seg_probs, full_h, full_w));

  if (config_.use_lpse) {
    const Tensor lesion_plane = detach_plane(out.seg_probs, 1);
    LpseOutputs lpse = lpse_forward(features, lesion_plane, sp.cls_weight, sp.cls_bias);
    out.diagnosis = lpse.diagnosis;
    out.descriptor = lpse.descriptor;
  } else {
    Tensor means = channel_gap(features);
    Tensor logits = linear(reshape(means, {1, means.dim(0)}), sp.cls_weight, sp.cls_bias);
    Tensor probs = softmax(logits, /*axis=*/1);
    out.diagnosis = DiagnosisProbs{reshape(probs, {probs.dim(1)})};
  }

  out.features_out = config_.use_dgff ? dgff_forward(features, out.diagnosis, sp.dgff)
                                      : features;
  return out;
}

std::vector<StageOutputs> CascadeModel::forward(const Tensor& image) const {
  const std::array<Tensor, 5> taps = backbone_forward(image);
  Tensor features = fuse_skip_features(taps[2], taps[3], taps[4]);
  const std::int64_t full_h = image.dim(1);
  const std::int64_t full_w = image.dim(2);

  std::vector<StageOutputs> stages;
  stages.reserve(static_cast<std::size_t>(config_.num_stages));
  for (int t = 0; t < config_.num_stages; ++t) {
    stages.push_back(stage_forward(features, t, full_h, full_w));
    features = stages.back().features_out;
  }
  return stages;
}

Tensor CascadeModel::loss(const std::vector<StageOutputs>& stages,
                          const std::vector<std::int64_t>& seg_labels, int cls_label,
                          double beta) const {
  if (stages.empty()) throw ConfigError("loss: no stage outputs");
  if (cls_label < 0 || cls_label >= config_.cls_classes) {
    throw std::out_of_range("loss: class label " + std::to_string(cls_label) +
                            " out of range");
  }
  Tensor total;
  const std::size_t first =
      config_.supervise_all_stages ? 0 : stages.size() - 1;
  for (std::size_t t = first; t < stages.size(); ++t) {
    Tensor term = pixel_cross_entropy(stages[t].seg_probs_full, seg_labels);
    if (beta != 0.0) {
      const Tensor& probs = stages[t].diagnosis.probs;
      Tensor cls_term = cross_entropy(reshape(probs, {1, probs.dim(0)}),
                                      {static_cast<std::int64_t>(cls_label)});
      term = add(term, scale(cls_term, beta));
    }
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

}  // namespace lc
