#include "lesioncascade/lpse.hpp"

#include <cmath>

#include "lesioncascade/ops.hpp"

namespace lc {

namespace {

constexpr double kStdClamp = 1e-12;

std::vector<std::int64_t> mask_pixels(const BinaryMask& mask) {
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(mask.count()));
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) idx.push_back(static_cast<std::int64_t>(i));
  }
  return idx;
}

}  // namespace

LesionDescriptor region_statistics(const Tensor& features, const RegionPair& regions) {
  detail::require_defined(features, "region_statistics");
  if (features.rank() != 3) {
    throw ShapeError("region_statistics: expected [K,H,W] features, got " +
                     shape_str(features.shape()));
  }
  const std::int64_t K = features.dim(0);
  const std::int64_t H = features.dim(1);
  const std::int64_t W = features.dim(2);
  if (regions.center.height != H || regions.center.width != W ||
      !regions.center.same_size(regions.periphery)) {
    throw ShapeError("region_statistics: region masks do not match the feature grid");
  }
  const std::int64_t P = H * W;
  const std::vector<std::int64_t> center = mask_pixels(regions.center);
  const std::vector<std::int64_t> periphery = mask_pixels(regions.periphery);

  auto out = detail::make_op_node({K, 4}, "region_statistics", {features.node});
  const double* f = features.node->values.data();
  for (std::int64_t k = 0; k < K; ++k) {
    const double* plane = f + k * P;
    double* row = out->values.data() + k * 4;
    for (int region = 0; region < 2; ++region) {
      const auto& pix = region == 0 ? center : periphery;
      double mu = 0.0, sigma = 0.0;
      if (!pix.empty()) {
        const double inv_n = 1.0 / static_cast<double>(pix.size());
        for (std::int64_t i : pix) mu += plane[i];
        mu *= inv_n;
        double ss = 0.0;
        for (std::int64_t i : pix) {
          const double d = plane[i] - mu;
          ss += d * d;
        }
        sigma = std::sqrt(ss * inv_n);
      }
      row[region] = mu;       // columns 0,1: means
      row[2 + region] = sigma;  // columns 2,3: stds
    }
  }

  if (out->requires_grad) {
    out->backward_fn = [K, P, center, periphery](TensorNode& self) {
      TensorNode& x = *self.parents[0];
      if (!x.requires_grad) return;
      const double* f = x.values.data();
      for (std::int64_t k = 0; k < K; ++k) {
        const double* row = self.values.data() + k * 4;
        const double* grow = self.grad.data() + k * 4;
        double* gplane = x.grad.data() + k * P;
        const double* plane = f + k * P;
        for (int region = 0; region < 2; ++region) {
          const auto& pix = region == 0 ? center : periphery;
          if (pix.empty()) continue;
          const double inv_n = 1.0 / static_cast<double>(pix.size());
          const double g_mean = grow[region] * inv_n;
          const double mu = row[region];
          const double sigma = std::max(row[2 + region], kStdClamp);
          const double g_std = grow[2 + region] * inv_n / sigma;
          for (std::int64_t i : pix) {
            gplane[i] += g_mean + g_std * (plane[i] - mu);
          }
        }
      }
    };
  }
  return LesionDescriptor{Tensor(out)};
}

DiagnosisProbs classify_descriptor(const LesionDescriptor& descriptor,
                                   const Tensor& weight, const Tensor& bias) {
  detail::require_defined(descriptor.values, "classify_descriptor");
  if (descriptor.values.rank() != 2 || descriptor.values.dim(1) != 4) {
    throw ShapeError("classify_descriptor: expected a [K,4] descriptor, got " +
                     shape_str(descriptor.values.shape()));
  }
  const std::int64_t flat = descriptor.values.numel();
  Tensor row = reshape(descriptor.values, {1, flat});
  Tensor logits = linear(row, weight, bias);
  Tensor probs = softmax(logits, /*axis=*/1);
  return DiagnosisProbs{reshape(probs, {probs.dim(1)})};
}

LpseOutputs lpse_forward(const Tensor& features, const Tensor& lesion_probs,
                         const Tensor& cls_weight, const Tensor& cls_bias) {
  detail::require_defined(features, "lpse_forward");
  detail::require_defined(lesion_probs, "lpse_forward");
  if (features.rank() != 3) {
    throw ShapeError("lpse_forward: expected [K,H,W] features, got " +
                     shape_str(features.shape()));
  }
  if (lesion_probs.rank() != 2 || lesion_probs.dim(0) != features.dim(1) ||
      lesion_probs.dim(1) != features.dim(2)) {
    throw ShapeError("lpse_forward: probability map " + shape_str(lesion_probs.shape()) +
                     " does not match feature grid " + shape_str(features.shape()));
  }

  LpseOutputs out;
  out.mask = threshold_mask(lesion_probs);
  const StructuringElement element = disk_element(out.mask.height);
  out.regions = lesion_regions(out.mask, element);

  const std::int64_t mask_count = out.mask.count();
  if (mask_count == 0) {
    // No predicted lesion: both regions fall back to the full frame.
    BinaryMask full(out.mask.height, out.mask.width);
    std::fill(full.bits.begin(), full.bits.end(), std::uint8_t{1});
    out.regions.center = full;
    out.regions.periphery = full;
    out.regions.center_count = out.regions.periphery_count = full.count();
  } else if (out.regions.center_count == 0) {
    // Erosion removed everything: the mask itself stands in for the centre.
    out.regions.center = out.mask;
    out.regions.center_count = mask_count;
  }

  out.descriptor = region_statistics(features, out.regions);
  out.diagnosis = classify_descriptor(out.descriptor, cls_weight, cls_bias);
  return out;
}

}  // namespace lc
