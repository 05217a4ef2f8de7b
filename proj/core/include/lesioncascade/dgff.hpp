#pragma once

#include "lesioncascade/lpse.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

// Parameters of one fusion block. The mix weights are scalars by default; a
// per-channel variant (rank-1, length K) is supported behind a model flag.
// At init mix_gated = 0 and mix_identity = 1, and the refinement kernels are
// identity maps, so the whole block is a pass-through for non-negative input.
struct DgffParams {
  Tensor gate_weight;     // [K, K+C]
  Tensor gate_bias;       // [K]
  Tensor mix_gated;       // scalar or [K]
  Tensor mix_identity;    // scalar or [K]
  Tensor refine1_weight;  // [K,K,3,3]
  Tensor refine1_bias;    // [K]
  Tensor refine2_weight;  // [K,K,3,3]
  Tensor refine2_bias;    // [K]
};

// Global average pooling over the spatial grid: [K,H,W] -> [K].
Tensor channel_gap(const Tensor& features);

// tanh(linear(concat(channel means, class probabilities))): a per-channel
// gate in (-1,1) conditioned on the stage diagnosis.
Tensor diagnosis_gate(const Tensor& channel_means /*[K]*/,
                      const DiagnosisProbs& diagnosis,
                      const Tensor& weight /*[K,K+C]*/, const Tensor& bias /*[K]*/);

// mix_gated * (gate ⊙ features) + mix_identity * features, channel-broadcast.
Tensor recalibrate(const Tensor& features, const Tensor& gate,
                   const Tensor& mix_gated, const Tensor& mix_identity);

// Two 3x3 same-padding convolutions with a relu between them.
Tensor refine(const Tensor& features, const DgffParams& params);

// Full block: gap -> gate -> recalibrate -> refine.
Tensor dgff_forward(const Tensor& features, const DiagnosisProbs& diagnosis,
                    const DgffParams& params);

}  // namespace lc
