#pragma once

#include "lesioncascade/morphology.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

// Per-channel region statistics, rows ordered [centre mean, periphery mean,
// centre std, periphery std]. The std columns use the population convention
// (divide by the pixel count).
struct LesionDescriptor {
  Tensor values;  // [K,4]
};

// Softmax class probabilities, index 0 = non-melanoma, index 1 = melanoma.
struct DiagnosisProbs {
  Tensor probs;  // [C]
};

// Differentiable statistics of `features` over the two regions. Gradients
// flow into the feature values only; the region masks are constants of the
// operation. A region with no pixels yields zeros in its columns and passes
// no gradient (callers normally prevent this via the fallbacks in
// lpse_forward).
LesionDescriptor region_statistics(const Tensor& features /*[K,H,W]*/,
                                   const RegionPair& regions);

// Flattens the descriptor row-major ([K,4], channel-major) through a linear
// layer and softmax.
DiagnosisProbs classify_descriptor(const LesionDescriptor& descriptor,
                                   const Tensor& weight /*[C,4K]*/,
                                   const Tensor& bias /*[C]*/);

struct LpseOutputs {
  BinaryMask mask;        // thresholded lesion probabilities
  RegionPair regions;     // after fallback resolution
  LesionDescriptor descriptor;
  DiagnosisProbs diagnosis;
};

// Full pipeline: threshold the probability map, split centre/periphery with a
// disk element sized from the map height, resolve degenerate masks, then
// compute and classify the descriptor. Fallbacks: an empty centre with a
// non-empty mask uses the mask itself as the centre; an empty mask uses the
// full frame for both regions.
LpseOutputs lpse_forward(const Tensor& features /*[K,H,W]*/,
                         const Tensor& lesion_probs /*[H,W]*/,
                         const Tensor& cls_weight /*[C,4K]*/,
                         const Tensor& cls_bias /*[C]*/);

}  // namespace lc
