#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lesioncascade/tensor.hpp"

namespace lc {

// Dense binary mask, row-major, 1 = foreground. Pixels outside the image are
// background for every operation here.
struct BinaryMask {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::int64_t h, std::int64_t w)
      : height(h), width(w), bits(static_cast<std::size_t>(h * w), 0) {}

  bool at(std::int64_t r, std::int64_t c) const {
    return bits[static_cast<std::size_t>(r * width + c)] != 0;
  }
  void set(std::int64_t r, std::int64_t c, bool v) {
    bits[static_cast<std::size_t>(r * width + c)] = v ? 1 : 0;
  }
  std::int64_t count() const;
  bool empty() const { return count() == 0; }
  bool same_size(const BinaryMask& o) const {
    return height == o.height && width == o.width;
  }
  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.height == b.height && a.width == b.width && a.bits == b.bits;
  }
};

// Disk-shaped structuring element: offsets (dr,dc) with dr^2 + dc^2 <= r^2.
struct StructuringElement {
  std::int64_t radius = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> offsets;
};

StructuringElement disk_with_radius(std::int64_t radius);

// Element used on a mask of the given height: radius = max(1, round(h/16)).
StructuringElement disk_element(std::int64_t mask_height);

// Foreground where probability is strictly greater than 0.5. Probabilities
// must lie in [0,1].
BinaryMask threshold_mask(const Tensor& probabilities /*[H,W]*/);

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element);
BinaryMask erode(const BinaryMask& mask, const StructuringElement& element);

// Lesion centre (erosion) and periphery (dilation minus erosion), disjoint by
// construction, with their union equal to the dilation.
struct RegionPair {
  BinaryMask center;
  BinaryMask periphery;
  std::int64_t center_count = 0;
  std::int64_t periphery_count = 0;
};

RegionPair lesion_regions(const BinaryMask& mask, const StructuringElement& element);

}  // namespace lc
