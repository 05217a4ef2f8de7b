#pragma once

// The finite-difference sweep over every differentiable operation, shared by
// the unit tests and the acceptance gate. Each case builds random inputs
// from a seed and returns the gradient-check report; inputs for kinked
// primitives are drawn with magnitudes bounded away from the kink (relu
// inputs at |x| >= 0.05, region stds away from 0).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lesioncascade/dgff.hpp"
#include "lesioncascade/lpse.hpp"
#include "lesioncascade/morphology.hpp"
#include "lesioncascade/nn.hpp"
#include "lesioncascade/ops.hpp"
#include "lesioncascade/random.hpp"
#include "lesioncascade/tensor.hpp"
#include "testing/gradcheck.hpp"

namespace lctest {

struct FdCase {
  std::string name;
  std::function<GradCheckReport(std::uint64_t seed)> run;
};

inline lc::Tensor random_tensor(lc::Shape shape, lc::Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(lc::shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return lc::Tensor::from_values(std::move(shape), std::move(v), /*requires_grad=*/true);
}

// Magnitude in [0.05, 1] with random sign: safe distance from the relu kink
// under a 1e-6 probe.
inline lc::Tensor random_kink_free(lc::Shape shape, lc::Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(lc::shape_numel(shape)));
  for (double& x : v) {
    const double mag = rng.uniform(0.05, 1.0);
    x = rng.bernoulli(0.5) ? mag : -mag;
  }
  return lc::Tensor::from_values(std::move(shape), std::move(v), /*requires_grad=*/true);
}

inline std::vector<FdCase> fd_cases() {
  using lc::Rng;
  using lc::Tensor;
  std::vector<FdCase> cases;
  auto add_case = [&](std::string name,
                      std::function<GradCheckReport(std::uint64_t)> run) {
    cases.push_back({std::move(name), std::move(run)});
  };

  add_case("add/sub/mul/scale", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({3, 4}, rng);
    auto f = [&] {
      return lc::sum(lc::scale(lc::mul(lc::add(a, b), lc::sub(a, b)), 0.7));
    };
    return check_gradients(f, {a, b});
  });

  add_case("mean", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({2, 3, 2}, rng);
    auto f = [&] { return lc::mean(lc::mul(a, a)); };
    return check_gradients(f, {a});
  });

  add_case("reshape+concat", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({6}, rng);
    Tensor b = random_tensor({2}, rng);
    auto f = [&] {
      Tensor joined = lc::concat(a, b);
      Tensor grid = lc::reshape(joined, {2, 4});
      return lc::sum(lc::mul(grid, grid));
    };
    return check_gradients(f, {a, b});
  });

  add_case("relu", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_kink_free({4, 5}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::relu(a), a)); };
    return check_gradients(f, {a});
  });

  add_case("tanh", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({7}, rng, -2.0, 2.0);
    auto f = [&] { return lc::sum(lc::tanh(a)); };
    return check_gradients(f, {a});
  });

  add_case("softmax last axis", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 4}, rng, -2.0, 2.0);
    Tensor w = random_tensor({3, 4}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::softmax(a, -1), w)); };
    return check_gradients(f, {a});
  });

  add_case("softmax axis 0", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({2, 3, 3}, rng, -2.0, 2.0);
    Tensor w = random_tensor({2, 3, 3}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::softmax(a, 0), w)); };
    return check_gradients(f, {a});
  });

  add_case("linear", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({2, 4}, rng);
    Tensor b = random_tensor({2}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::linear(x, w, b), lc::linear(x, w, b))); };
    return check_gradients(f, {x, w, b});
  });

  add_case("conv2d 3x3 pad 1", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({1, 2, 5, 5}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    auto f = [&] {
      Tensor y = lc::conv2d(x, w, b, /*stride=*/1, /*padding=*/1);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {x, w, b});
  });

  add_case("conv2d 2x2 stride 2", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({1, 2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 2, 2}, rng);
    Tensor b = random_tensor({3}, rng);
    auto f = [&] {
      Tensor y = lc::conv2d(x, w, b, /*stride=*/2, /*padding=*/0);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {x, w, b});
  });

  add_case("conv2d 3x3 stride 1 no pad", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({2, 1, 5, 5}, rng);
    Tensor w = random_tensor({2, 1, 3, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    auto f = [&] {
      Tensor y = lc::conv2d(x, w, b, /*stride=*/1, /*padding=*/0);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {x, w, b});
  });

  add_case("upsample_bilinear", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({2, 3, 3}, rng);
    Tensor w = random_tensor({2, 7, 5}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::upsample_bilinear(x, 7, 5), w)); };
    return check_gradients(f, {x});
  });

  add_case("cross_entropy probs", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor z = random_tensor({3, 4}, rng, -1.5, 1.5);
    const std::vector<std::int64_t> targets{1, 0, 3};
    auto f = [&] { return lc::cross_entropy(lc::softmax(z, -1), targets); };
    return check_gradients(f, {z});
  });

  add_case("cross_entropy logits", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor z = random_tensor({3, 4}, rng, -1.5, 1.5);
    const std::vector<std::int64_t> targets{2, 3, 0};
    auto f = [&] { return lc::cross_entropy(z, targets, /*from_logits=*/true); };
    return check_gradients(f, {z});
  });

  add_case("pixel_cross_entropy", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor z = random_tensor({2, 3, 3}, rng, -1.5, 1.5);
    std::vector<std::int64_t> labels(9);
    for (auto& l : labels) l = static_cast<std::int64_t>(rng.uniform_index(2));
    auto f = [&] {
      return lc::pixel_cross_entropy(lc::softmax(z, 0), labels);
    };
    return check_gradients(f, {z});
  });

  add_case("pixel_cross_entropy logits", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor z = random_tensor({2, 3, 3}, rng, -1.5, 1.5);
    std::vector<std::int64_t> labels(9);
    for (auto& l : labels) l = static_cast<std::int64_t>(rng.uniform_index(2));
    auto f = [&] { return lc::pixel_cross_entropy(z, labels, /*from_logits=*/true); };
    return check_gradients(f, {z});
  });

  add_case("channel_mean+channel_scale", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({3, 4, 4}, rng);
    Tensor s = random_tensor({3}, rng);
    auto f = [&] {
      Tensor scaled = lc::channel_scale(x, s);
      return lc::sum(lc::mul(lc::channel_mean(scaled), lc::channel_mean(scaled)));
    };
    return check_gradients(f, {x, s});
  });

  add_case("weighted_sum scalar", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({2, 3, 3}, rng);
    Tensor b = random_tensor({2, 3, 3}, rng);
    Tensor wa = random_tensor({}, rng);
    Tensor wb = random_tensor({}, rng);
    auto f = [&] {
      Tensor y = lc::weighted_sum(a, b, wa, wb);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {a, b, wa, wb});
  });

  add_case("weighted_sum per channel", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor({3, 2, 2}, rng);
    Tensor b = random_tensor({3, 2, 2}, rng);
    Tensor wa = random_tensor({3}, rng);
    Tensor wb = random_tensor({3}, rng);
    auto f = [&] {
      Tensor y = lc::weighted_sum(a, b, wa, wb);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {a, b, wa, wb});
  });

  add_case("normalize_channels", [](std::uint64_t seed) {
    Rng rng(seed);
    // Positive inputs keep the channel sums well away from the clamp.
    Tensor x = random_tensor({3, 3, 3}, rng, 0.2, 1.0);
    Tensor w = random_tensor({3, 3, 3}, rng);
    auto f = [&] { return lc::sum(lc::mul(lc::normalize_channels(x), w)); };
    return check_gradients(f, {x});
  });

  add_case("region_statistics", [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({2, 4}, rng);
    // Regions with >= 4 spread-out pixels each: stds stay away from the
    // sqrt kink at 0.
    lc::RegionPair regions;
    regions.center = lc::BinaryMask(6, 6);
    regions.periphery = lc::BinaryMask(6, 6);
    for (int k = 0; k < 6; ++k) {
      regions.center.set(rng.uniform_index(3), rng.uniform_index(6), true);
      regions.periphery.set(3 + rng.uniform_index(3), rng.uniform_index(6), true);
    }
    regions.center_count = regions.center.count();
    regions.periphery_count = regions.periphery.count();
    auto f = [&] {
      return lc::sum(lc::mul(lc::region_statistics(x, regions).values, w));
    };
    return check_gradients(f, {x});
  });

  add_case("dgff_forward", [](std::uint64_t seed) {
    Rng rng(seed);
    const int K = 3, C = 2;
    Tensor features = random_tensor({K, 4, 4}, rng, 0.1, 1.0);
    Tensor probs_src = random_tensor({C}, rng, -1.0, 1.0);
    lc::DgffParams p;
    p.gate_weight = random_tensor({K, K + C}, rng);
    p.gate_bias = random_tensor({K}, rng);
    p.mix_gated = random_tensor({}, rng);
    p.mix_identity = random_tensor({}, rng);
    p.refine1_weight = random_tensor({K, K, 3, 3}, rng, -0.3, 0.3);
    p.refine1_bias = random_tensor({K}, rng, 0.1, 0.5);
    p.refine2_weight = random_tensor({K, K, 3, 3}, rng, -0.3, 0.3);
    p.refine2_bias = random_tensor({K}, rng);
    auto f = [&] {
      lc::DiagnosisProbs diag{lc::softmax(probs_src, 0)};
      Tensor y = lc::dgff_forward(features, diag, p);
      return lc::sum(lc::mul(y, y));
    };
    return check_gradients(f, {features, probs_src, p.gate_weight, p.gate_bias,
                               p.mix_gated, p.mix_identity, p.refine1_weight,
                               p.refine1_bias, p.refine2_weight, p.refine2_bias});
  });

  return cases;
}

}  // namespace lctest
