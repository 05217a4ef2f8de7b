#include "lesioncascade/dgff.hpp"

#include "lesioncascade/ops.hpp"

namespace lc {

namespace {

// conv2d over a single [C,H,W] tensor.
Tensor conv_chw(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  Tensor batched = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  Tensor y = conv2d(batched, w, b, stride, padding);
  return reshape(y, {y.dim(1), y.dim(2), y.dim(3)});
}

}  // namespace

Tensor channel_gap(const Tensor& features) { return channel_mean(features); }

Tensor diagnosis_gate(const Tensor& channel_means, const DiagnosisProbs& diagnosis,
                      const Tensor& weight, const Tensor& bias) {
  detail::require_defined(channel_means, "diagnosis_gate");
  detail::require_defined(diagnosis.probs, "diagnosis_gate");
  if (channel_means.rank() != 1 || diagnosis.probs.rank() != 1) {
    throw ShapeError("diagnosis_gate: channel means and probabilities must be rank-1");
  }
  Tensor joint = concat(channel_means, diagnosis.probs);
  Tensor row = reshape(joint, {1, joint.dim(0)});
  Tensor pre = linear(row, weight, bias);
  Tensor gate = tanh(pre);
  return reshape(gate, {gate.dim(1)});
}

Tensor recalibrate(const Tensor& features, const Tensor& gate,
                   const Tensor& mix_gated, const Tensor& mix_identity) {
  Tensor gated = channel_scale(features, gate);
  return weighted_sum(gated, features, mix_gated, mix_identity);
}

Tensor refine(const Tensor& features, const DgffParams& params) {
  Tensor first = conv_chw(features, params.refine1_weight, params.refine1_bias,
                          /*stride=*/1, /*padding=*/1);
  Tensor mid = relu(first);
  return conv_chw(mid, params.refine2_weight, params.refine2_bias,
                  /*stride=*/1, /*padding=*/1);
}

Tensor dgff_forward(const Tensor& features, const DiagnosisProbs& diagnosis,
                    const DgffParams& params) {
  Tensor means = channel_gap(features);
  Tensor gate = diagnosis_gate(means, diagnosis, params.gate_weight, params.gate_bias);
  Tensor mixed = recalibrate(features, gate, params.mix_gated, params.mix_identity);
  return refine(mixed, params);
}

}  // namespace lc
