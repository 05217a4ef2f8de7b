#pragma once

// Independent reference implementations used to cross-check the library:
// straight-from-the-definition morphology, two-pass region statistics, and
// the Mann-Whitney rank form of the AUC. Deliberately naive.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lesioncascade/morphology.hpp"

namespace lctest {

// Dilation as the set definition: p is set iff some offset o in the element
// has p - o inside the mask.
inline lc::BinaryMask brute_dilate(const lc::BinaryMask& mask,
                                   const lc::StructuringElement& element) {
  lc::BinaryMask out(mask.height, mask.width);
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      bool hit = false;
      for (const auto& [dr, dc] : element.offsets) {
        const std::int64_t sr = r - dr;
        const std::int64_t sc = c - dc;
        if (sr >= 0 && sr < mask.height && sc >= 0 && sc < mask.width &&
            mask.at(sr, sc)) {
          hit = true;
          break;
        }
      }
      out.set(r, c, hit);
    }
  }
  return out;
}

// Erosion as the set definition: p is set iff every offset lands on a
// foreground pixel; off-image counts as background.
inline lc::BinaryMask brute_erode(const lc::BinaryMask& mask,
                                  const lc::StructuringElement& element) {
  lc::BinaryMask out(mask.height, mask.width);
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      bool all = true;
      for (const auto& [dr, dc] : element.offsets) {
        const std::int64_t sr = r + dr;
        const std::int64_t sc = c + dc;
        if (sr < 0 || sr >= mask.height || sc < 0 || sc >= mask.width ||
            !mask.at(sr, sc)) {
          all = false;
          break;
        }
      }
      out.set(r, c, all);
    }
  }
  return out;
}

struct RegionMoments {
  double mean = 0.0;
  double stddev = 0.0;  // population convention
};

// Two-pass masked mean / stddev over one channel plane.
inline RegionMoments brute_region_moments(const std::vector<double>& plane,
                                          const lc::BinaryMask& region) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < region.height * region.width; ++i) {
    if (region.bits[static_cast<std::size_t>(i)]) {
      sum += plane[static_cast<std::size_t>(i)];
      ++n;
    }
  }
  RegionMoments m;
  if (n == 0) return m;
  m.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::int64_t i = 0; i < region.height * region.width; ++i) {
    if (region.bits[static_cast<std::size_t>(i)]) {
      const double d = plane[static_cast<std::size_t>(i)] - m.mean;
      sq += d * d;
    }
  }
  m.stddev = std::sqrt(sq / static_cast<double>(n));
  return m;
}

// AUC as the Mann-Whitney statistic: over all positive/negative pairs, the
// fraction with score(pos) > score(neg), ties counted half.
inline double mann_whitney_auc(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw std::invalid_argument("mann_whitney_auc: need both classes");
  return wins / static_cast<double>(pairs);
}

}  // namespace lctest
