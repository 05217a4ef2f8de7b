#include "lesioncascade/morphology.hpp"

#include <cmath>
#include <stdexcept>

namespace lc {

std::int64_t BinaryMask::count() const {
  std::int64_t n = 0;
  for (std::uint8_t b : bits) n += b;
  return n;
}

StructuringElement disk_with_radius(std::int64_t radius) {
  if (radius < 0) throw std::invalid_argument("structuring element radius must be >= 0");
  StructuringElement e;
  e.radius = radius;
  const std::int64_t r2 = radius * radius;
  for (std::int64_t dr = -radius; dr <= radius; ++dr) {
    for (std::int64_t dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc <= r2) e.offsets.emplace_back(dr, dc);
    }
  }
  return e;
}

StructuringElement disk_element(std::int64_t mask_height) {
  if (mask_height <= 0) throw std::invalid_argument("mask height must be positive");
  const std::int64_t radius =
      std::max<std::int64_t>(1, std::llround(static_cast<double>(mask_height) / 16.0));
  return disk_with_radius(radius);
}

BinaryMask threshold_mask(const Tensor& probabilities) {
  detail::require_defined(probabilities, "threshold_mask");
  if (probabilities.rank() != 2) {
    throw ShapeError("threshold_mask: expected a [H,W] map, got " +
                     shape_str(probabilities.shape()));
  }
  const std::int64_t h = probabilities.dim(0);
  const std::int64_t w = probabilities.dim(1);
  const auto& v = probabilities.values();
  BinaryMask mask(h, w);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw std::invalid_argument("threshold_mask: probability " + std::to_string(v[i]) +
                                  " outside [0,1]");
    }
    mask.bits[i] = v[i] > 0.5 ? 1 : 0;
  }
  return mask;
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element) {
  // p is foreground iff some offset o has p - o in the mask, i.e. the element
  // centred at p touches the mask.
  BinaryMask out(mask.height, mask.width);
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      bool hit = false;
      for (const auto& [dr, dc] : element.offsets) {
        const std::int64_t rr = r - dr;
        const std::int64_t cc = c - dc;
        if (rr >= 0 && rr < mask.height && cc >= 0 && cc < mask.width && mask.at(rr, cc)) {
          hit = true;
          break;
        }
      }
      out.set(r, c, hit);
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& element) {
  // p is foreground iff the element centred at p lies entirely in the mask;
  // positions off the image count as background, so the image border erodes.
  BinaryMask out(mask.height, mask.width);
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      bool all = true;
      for (const auto& [dr, dc] : element.offsets) {
        const std::int64_t rr = r + dr;
        const std::int64_t cc = c + dc;
        if (rr < 0 || rr >= mask.height || cc < 0 || cc >= mask.width || !mask.at(rr, cc)) {
          all = false;
          break;
        }
      }
      out.set(r, c, all);
    }
  }
  return out;
}

RegionPair lesion_regions(const BinaryMask& mask, const StructuringElement& element) {
  RegionPair pair;
  const BinaryMask dil = dilate(mask, element);
  pair.center = erode(mask, element);
  pair.periphery = BinaryMask(mask.height, mask.width);
  for (std::size_t i = 0; i < dil.bits.size(); ++i) {
    pair.periphery.bits[i] = (dil.bits[i] != 0 && pair.center.bits[i] == 0) ? 1 : 0;
  }
  pair.center_count = pair.center.count();
  pair.periphery_count = pair.periphery.count();
  return pair;
}

}  // namespace lc
