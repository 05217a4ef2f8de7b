// Microbenchmarks for the hot paths: convolution (forward and backward),
// morphology, region statistics, the full model forward pass, and one
// training step. Run with --benchmark_filter=<regex> to narrow.
#include <benchmark/benchmark.h>

#include <vector>

#include "lesioncascade/data.hpp"
#include "lesioncascade/lpse.hpp"
#include "lesioncascade/metrics.hpp"
#include "lesioncascade/model.hpp"
#include "lesioncascade/morphology.hpp"
#include "lesioncascade/ops.hpp"
#include "lesioncascade/random.hpp"
#include "lesioncascade/tensor.hpp"

namespace {

using namespace lc;

Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  Rng rng(seed);
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

void bm_conv2d_forward(benchmark::State& state) {
  NoGradGuard ng;
  const std::int64_t c = state.range(0);
  Tensor x = random_tensor({1, c, 32, 32}, 1);
  Tensor w = random_tensor({c, c, 3, 3}, 2);
  Tensor b = random_tensor({c}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  }
}

void bm_conv2d_train_step(benchmark::State& state) {
  const std::int64_t c = state.range(0);
  for (auto _ : state) {
    Tensor x = random_tensor({1, c, 32, 32}, 1, true);
    Tensor w = random_tensor({c, c, 3, 3}, 2, true);
    Tensor b = random_tensor({c}, 3, true);
    Tensor loss = mean(relu(conv2d(x, w, b, 1, 1)));
    loss.backward();
    benchmark::DoNotOptimize(loss);
  }
}

void bm_dilate(benchmark::State& state) {
  Rng rng(7);
  BinaryMask mask(64, 64);
  for (auto& bit : mask.bits) bit = rng.bernoulli(0.3) ? 1 : 0;
  StructuringElement disk = disk_with_radius(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dilate(mask, disk));
  }
}

void bm_region_statistics(benchmark::State& state) {
  NoGradGuard ng;
  Tensor features = random_tensor({64, 16, 16}, 11);
  BinaryMask mask(16, 16);
  for (std::int64_t r = 4; r < 12; ++r)
    for (std::int64_t c = 4; c < 12; ++c) mask.set(r, c, true);
  RegionPair regions = lesion_regions(mask, disk_element(16));
  for (auto _ : state) {
    benchmark::DoNotOptimize(region_statistics(features, regions));
  }
}

void bm_model_forward(benchmark::State& state) {
  NoGradGuard ng;
  ModelConfig cfg;
  cfg.block_channels = {8, 16, 32, 64, 128};
  cfg.num_stages = static_cast<int>(state.range(0));
  CascadeModel model(cfg, 42);
  Tensor image = random_tensor({3, 64, 64}, 13);
  for (double& v : image.values()) v = 0.5 + 0.4 * v;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(image));
  }
}

void bm_model_train_step(benchmark::State& state) {
  ModelConfig cfg;
  cfg.block_channels = {8, 16, 32, 64, 128};
  cfg.num_stages = 3;
  CascadeModel model(cfg, 42);
  Tensor image = random_tensor({3, 64, 64}, 13);
  for (double& v : image.values()) v = 0.5 + 0.4 * v;
  Rng rng(17);
  std::vector<std::int64_t> seg_labels(64 * 64);
  for (auto& v : seg_labels) v = rng.bernoulli(0.3) ? 1 : 0;
  for (auto _ : state) {
    model.params().zero_grad();
    auto stages = model.forward(image);
    Tensor loss = model.loss(stages, seg_labels, 1, 0.3);
    loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
}

void bm_roc_auc(benchmark::State& state) {
  Rng rng(23);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 2000; ++i) {
    scores.push_back(rng.uniform(0.0, 1.0));
    labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_curve(scores, labels).auc);
  }
}

void bm_synthetic_sample(benchmark::State& state) {
  SynthConfig cfg;
  cfg.count_per_class = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    cfg.seed = ++seed;
    benchmark::DoNotOptimize(generate_synthetic(cfg));
  }
}

BENCHMARK(bm_conv2d_forward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_conv2d_train_step)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_dilate)->Arg(1)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_region_statistics)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_model_forward)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_model_train_step)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_roc_auc)->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_synthetic_sample)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
