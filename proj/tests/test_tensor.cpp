#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "lesioncascade/checkpoint.hpp"
#include "lesioncascade/parallel.hpp"
#include "lesioncascade/errors.hpp"
#include "lesioncascade/nn.hpp"
#include "lesioncascade/ops.hpp"
#include "lesioncascade/optim.hpp"
#include "lesioncascade/random.hpp"
#include "lesioncascade/tensor.hpp"
#include "testing/fd_suite.hpp"
#include "testing/gradcheck.hpp"

using lc::Tensor;

TEST_CASE("shape helpers and factories") {
  CHECK(lc::shape_numel({}) == 1);
  CHECK(lc::shape_numel({2, 3, 4}) == 24);

  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.rank() == 2);
  CHECK(z.numel() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.dim(-1) == 3);
  CHECK(z.at({1, 2}) == 0.0);

  Tensor f = Tensor::full({2}, 1.5);
  CHECK(f.at({0}) == 1.5);
  CHECK(f.at({1}) == 1.5);

  Tensor s = Tensor::scalar(4.25);
  CHECK(s.rank() == 0);
  CHECK(s.numel() == 1);
  CHECK(s.item() == 4.25);

  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1.0, 2.0, 3.0}), lc::ShapeError);
}

TEST_CASE("elementwise arithmetic values") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({2, 2}, {10, 20, 30, 40});
  CHECK(lc::add(a, b).values() == std::vector<double>{11, 22, 33, 44});
  CHECK(lc::sub(b, a).values() == std::vector<double>{9, 18, 27, 36});
  CHECK(lc::mul(a, b).values() == std::vector<double>{10, 40, 90, 160});
  CHECK(lc::scale(a, -2.0).values() == std::vector<double>{-2, -4, -6, -8});
  CHECK(lc::sum(a).item() == 10.0);
  CHECK(lc::mean(b).item() == 25.0);

  Tensor odd = Tensor::from_values({3}, {1, 2, 3});
  CHECK_THROWS_AS(lc::add(a, odd), lc::ShapeError);
}

TEST_CASE("leaf gradients accumulate, intermediates reset") {
  Tensor a = Tensor::from_values({2}, {3, 5}, /*requires_grad=*/true);
  Tensor double_a = lc::scale(a, 2.0);
  Tensor loss = lc::sum(double_a);
  loss.backward();
  CHECK(a.grad() == std::vector<double>{2, 2});

  // Second pass on a fresh graph accumulates into the leaf.
  lc::sum(lc::scale(a, 2.0)).backward();
  CHECK(a.grad() == std::vector<double>{4, 4});

  a.zero_grad();
  CHECK(a.grad() == std::vector<double>{0, 0});
}

TEST_CASE("backward rejects multi-element roots") {
  Tensor a = Tensor::from_values({2}, {1, 2}, true);
  Tensor y = lc::scale(a, 3.0);
  CHECK_THROWS_AS(y.backward(), lc::ShapeError);
}

TEST_CASE("graph is dropped under NoGradGuard and for grad-free inputs") {
  Tensor a = Tensor::from_values({2}, {1, 2}, /*requires_grad=*/true);
  {
    lc::NoGradGuard guard;
    Tensor y = lc::scale(a, 2.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node->parents.empty());
  }
  Tensor no_grad_in = Tensor::from_values({2}, {1, 2});
  Tensor y = lc::scale(no_grad_in, 2.0);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node->parents.empty());
}

TEST_CASE("backward seed scales gradients") {
  Tensor a = Tensor::from_values({3}, {1, 2, 3}, true);
  lc::sum(a).backward(0.25);
  CHECK(a.grad() == std::vector<double>{0.25, 0.25, 0.25});
}

TEST_CASE("reshape and concat") {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor r = lc::reshape(a, {3, 2});
  CHECK(r.shape() == lc::Shape{3, 2});
  CHECK(r.values() == a.values());
  CHECK_THROWS_AS(lc::reshape(a, {4, 2}), lc::ShapeError);

  Tensor u = Tensor::from_values({2}, {1, 2}, true);
  Tensor v = Tensor::from_values({3}, {3, 4, 5}, true);
  Tensor joined = lc::concat(u, v);
  CHECK(joined.values() == std::vector<double>{1, 2, 3, 4, 5});
  lc::sum(lc::mul(joined, joined)).backward();
  CHECK(u.grad() == std::vector<double>{2, 4});
  CHECK(v.grad() == std::vector<double>{6, 8, 10});
}

TEST_CASE("relu uses subgradient 0 at the kink") {
  Tensor a = Tensor::from_values({3}, {-1.0, 0.0, 2.0}, true);
  Tensor y = lc::relu(a);
  CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
  lc::sum(y).backward();
  CHECK(a.grad() == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("tanh matches the standard library") {
  Tensor a = Tensor::from_values({2}, {1.0, -0.5});
  Tensor y = lc::tanh(a);
  CHECK(y.at({0}) == doctest::Approx(0.7615941559557649).epsilon(1e-15));
  CHECK(y.at({1}) == doctest::Approx(std::tanh(-0.5)).epsilon(1e-15));
}

TEST_CASE("softmax values and shift stability") {
  Tensor a = Tensor::from_values({1, 2}, {0.0, std::log(3.0)});
  Tensor p = lc::softmax(a, -1);
  CHECK(p.at({0, 0}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at({0, 1}) == doctest::Approx(0.75).epsilon(1e-12));

  Tensor shifted = Tensor::from_values({1, 2}, {1000.0, 1000.0 + std::log(3.0)});
  Tensor ps = lc::softmax(shifted, -1);
  CHECK(ps.at({0, 0}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ps.at({0, 1}) == doctest::Approx(0.75).epsilon(1e-12));

  // Axis 0 of a [2,2,2]: every (h,w) column sums to one.
  Tensor b = Tensor::from_values({2, 2, 2}, {1, 2, 3, 4, -1, 0, 1, 2});
  Tensor pb = lc::softmax(b, 0);
  for (std::int64_t h = 0; h < 2; ++h)
    for (std::int64_t w = 0; w < 2; ++w)
      CHECK(pb.at({0, h, w}) + pb.at({1, h, w}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear hand case") {
  Tensor x = Tensor::from_values({1, 2}, {1, 2});
  Tensor w = Tensor::from_values({2, 2}, {1, 1, 0, 1});
  Tensor b = Tensor::from_values({2}, {0, 1});
  Tensor y = lc::linear(x, w, b);
  CHECK(y.values() == std::vector<double>{3, 3});

  Tensor bad = Tensor::from_values({1, 3}, {1, 2, 3});
  CHECK_THROWS_AS(lc::linear(bad, w, b), lc::ShapeError);
}

TEST_CASE("conv2d identity and hand sums") {
  Tensor x = Tensor::from_values({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor w1 = Tensor::from_values({1, 1, 1, 1}, {1.0});
  Tensor b0 = Tensor::zeros({1});
  Tensor y = lc::conv2d(x, w1, b0, 1, 0);
  CHECK(y.shape() == lc::Shape{1, 1, 2, 3});
  CHECK(y.values() == x.values());

  // Constant image, 3x3 ones kernel, padding 1: the interior sees 9 taps.
  Tensor c = Tensor::full({1, 1, 4, 4}, 2.0);
  Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor yc = lc::conv2d(c, ones, b0, 1, 1);
  CHECK(yc.at({0, 0, 1, 1}) == 18.0);
  CHECK(yc.at({0, 0, 2, 2}) == 18.0);
  CHECK(yc.at({0, 0, 0, 0}) == 8.0);  // corner sees 4 taps

  // Halving conv: 2x2 kernel, stride 2.
  Tensor x6 = Tensor::full({1, 1, 6, 6}, 1.0);
  Tensor w2 = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor yh = lc::conv2d(x6, w2, b0, 2, 0);
  CHECK(yh.shape() == lc::Shape{1, 1, 3, 3});
  CHECK(yh.at({0, 0, 0, 0}) == 4.0);

  // 3x3 stride 2 padding 1 on an even size: (6+2-3)/2 is not exact.
  Tensor w3 = Tensor::full({1, 1, 3, 3}, 1.0);
  CHECK_THROWS_AS(lc::conv2d(x6, w3, b0, 2, 1), lc::ShapeError);
}

TEST_CASE("conv2d forward is identical at any thread cap") {
  lc::Rng rng(99);
  Tensor x = lctest::random_tensor({2, 3, 8, 8}, rng);
  Tensor w = lctest::random_tensor({4, 3, 3, 3}, rng);
  Tensor b = lctest::random_tensor({4}, rng);
  lc::set_max_threads(1);
  Tensor y1 = lc::conv2d(x, w, b, 1, 1);
  lc::set_max_threads(0);
  Tensor y2 = lc::conv2d(x, w, b, 1, 1);
  CHECK(y1.values() == y2.values());
  lc::set_max_threads(0);
}

TEST_CASE("upsample_bilinear matches corner-aligned hand interpolation") {
  Tensor x = Tensor::from_values({1, 2, 2}, {0, 1, 2, 3});
  Tensor y = lc::upsample_bilinear(x, 3, 3);
  const std::vector<double> expected{0, 0.5, 1, 1, 1.5, 2, 2, 2.5, 3};
  REQUIRE(y.shape() == lc::Shape{1, 3, 3});
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(y.values()[i] == doctest::Approx(expected[i]).epsilon(1e-15));

  // Degenerate 1x1 source broadcasts its value.
  Tensor one = Tensor::from_values({1, 1, 1}, {7.0});
  Tensor up = lc::upsample_bilinear(one, 2, 2);
  CHECK(up.values() == std::vector<double>{7, 7, 7, 7});
}

TEST_CASE("cross entropy closed forms") {
  Tensor uniform = Tensor::from_values({1, 2}, {0.5, 0.5});
  CHECK(lc::cross_entropy(uniform, {0}).item() ==
        doctest::Approx(0.6931471805599453).epsilon(1e-15));

  Tensor sharp = Tensor::from_values({1, 2}, {0.9, 0.1});
  CHECK(lc::cross_entropy(sharp, {0}).item() ==
        doctest::Approx(0.10536051565782628).epsilon(1e-12));

  // Logit form agrees with softmax + probability form.
  Tensor z = Tensor::from_values({1, 2}, {1.0, 3.0});
  CHECK(lc::cross_entropy(z, {0}, /*from_logits=*/true).item() ==
        doctest::Approx(2.1269280110429727).epsilon(1e-12));
  CHECK(lc::cross_entropy(lc::softmax(z, -1), {0}).item() ==
        doctest::Approx(lc::cross_entropy(z, {0}, true).item()).epsilon(1e-12));

  CHECK_THROWS_AS(lc::cross_entropy(uniform, {2}), std::out_of_range);

  // Pixel form: uniform two-class map -> ln 2 regardless of labels.
  Tensor map = Tensor::full({2, 2, 2}, 0.5);
  CHECK(lc::pixel_cross_entropy(map, {0, 1, 1, 0}).item() ==
        doctest::Approx(0.6931471805599453).epsilon(1e-15));
}

TEST_CASE("channel ops hand cases") {
  Tensor x = Tensor::from_values({2, 1, 2}, {1, 3, 10, 30});
  Tensor m = lc::channel_mean(x);
  CHECK(m.values() == std::vector<double>{2, 20});

  Tensor s = Tensor::from_values({2}, {2, 0.5});
  CHECK(lc::channel_scale(x, s).values() == std::vector<double>{2, 6, 5, 15});

  Tensor a = Tensor::full({2, 1, 1}, 1.0);
  Tensor b = Tensor::full({2, 1, 1}, 10.0);
  Tensor wa = Tensor::scalar(2.0);
  Tensor wb = Tensor::scalar(3.0);
  CHECK(lc::weighted_sum(a, b, wa, wb).values() == std::vector<double>{32, 32});

  Tensor wac = Tensor::from_values({2}, {1, 0});
  Tensor wbc = Tensor::from_values({2}, {0, 1});
  CHECK(lc::weighted_sum(a, b, wac, wbc).values() == std::vector<double>{1, 10});

  Tensor n = Tensor::from_values({2, 1, 2}, {1, 3, 3, 1});
  Tensor nn = lc::normalize_channels(n);
  CHECK(nn.at({0, 0, 0}) == doctest::Approx(0.25));
  CHECK(nn.at({1, 0, 0}) == doctest::Approx(0.75));
  CHECK(nn.at({0, 0, 1}) == doctest::Approx(0.75));
}

TEST_CASE("finite differences across the operation set") {
  const double tol = 1e-4;
  for (const auto& c : lctest::fd_cases()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto rep = c.run(seed);
      INFO(c.name << " seed " << seed << " worst: " << rep.worst);
      CHECK(rep.max_rel_err < tol);
    }
  }
}

TEST_CASE("poly schedule and sgd step") {
  CHECK(lc::poly_lr(0, 1500, 1e-3, 0.9) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(lc::poly_lr(750, 1500, 1e-3, 0.9) ==
        doctest::Approx(0.0005358867312681466).epsilon(1e-12));
  CHECK(lc::poly_lr(1499, 1500, 1e-3, 0.9) ==
        doctest::Approx(1.3852171725067344e-06).epsilon(1e-12));
  CHECK_THROWS_AS(lc::poly_lr(1500, 1500, 1e-3, 0.9), std::invalid_argument);

  lc::ParameterStore store;
  Tensor w = store.create("w", {2});
  w.values() = {1.0, -1.0};
  w.node->grad = {0.5, -0.25};
  lc::sgd_step(store, 0.1);
  CHECK(w.values() == std::vector<double>{0.95, -0.975});
  CHECK(w.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("parameter store ordering and uniqueness") {
  lc::ParameterStore store;
  store.create("a", {2});
  store.create("b", {3});
  CHECK(store.size() == 2);
  CHECK(store.total_elements() == 5);
  CHECK(store.entries()[0].name == "a");
  CHECK(store.contains("b"));
  CHECK_FALSE(store.contains("c"));
  CHECK_THROWS_AS(store.create("a", {1}), std::logic_error);
}

TEST_CASE("identity conv initialization") {
  lc::Rng rng(3);
  Tensor w = Tensor::zeros({3, 3, 3, 3});
  lc::init_identity_conv(w);
  Tensor x = lctest::random_tensor({1, 3, 5, 5}, rng);
  Tensor b = Tensor::zeros({3});
  Tensor y = lc::conv2d(x, w, b, 1, 1);
  CHECK(y.values() == x.values());
}

TEST_CASE("rng statistical and structural behaviour") {
  lc::Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    all_equal = all_equal && (x == b.uniform());
    any_diff = any_diff || (x != c.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);

  lc::Rng r(7);
  for (int i = 0; i < 200; ++i) {
    CHECK(r.uniform_index(5) < 5);
    const auto v = r.uniform_int(-2, 2);
    CHECK(v >= -2);
    CHECK(v <= 2);
  }

  // fork(tag) derives an independent stream: parent state is untouched.
  lc::Rng p1(9), p2(9);
  lc::Rng child = p1.fork(1);
  (void)child.uniform();
  CHECK(p1.uniform() == p2.uniform());

  std::vector<int> perm{0, 1, 2, 3, 4, 5, 6, 7};
  lc::Rng s(11);
  s.shuffle(perm);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

  // Box-Muller sanity: mean near 0, variance near 1 over many draws.
  lc::Rng g(13);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("checkpoint round trip and strict loading") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "lc_test_ckpt.bin";

  lc::ParameterStore store;
  lc::Rng rng(5);
  Tensor w1 = store.create("layer.weight", {2, 3});
  Tensor w2 = store.create("layer.bias", {3});
  for (double& v : w1.values()) v = rng.uniform(-1, 1);
  for (double& v : w2.values()) v = rng.uniform(-1, 1);

  lc::save_checkpoint(path, store, "note = hello\n");
  const lc::Checkpoint ckpt = lc::read_checkpoint(path);
  CHECK(ckpt.metadata == "note = hello\n");
  REQUIRE(ckpt.entries.size() == 2);
  CHECK(ckpt.entries[0].name == "layer.weight");
  CHECK(ckpt.entries[0].shape == lc::Shape{2, 3});
  CHECK(ckpt.entries[0].values == w1.values());

  lc::ParameterStore fresh;
  fresh.create("layer.weight", {2, 3});
  fresh.create("layer.bias", {3});
  lc::load_parameters(fresh, ckpt);
  CHECK(fresh.get("layer.weight").values() == w1.values());
  CHECK(fresh.get("layer.bias").values() == w2.values());

  // Shape mismatch and missing/extra names are rejected by name.
  lc::ParameterStore wrong;
  wrong.create("layer.weight", {3, 2});
  wrong.create("layer.bias", {3});
  CHECK_THROWS_AS(lc::load_parameters(wrong, ckpt), lc::IoError);

  lc::ParameterStore extra;
  extra.create("layer.weight", {2, 3});
  extra.create("layer.bias", {3});
  extra.create("other", {1});
  CHECK_THROWS_AS(lc::load_parameters(extra, ckpt), lc::IoError);

  // Corrupt magic.
  {
    std::FILE* fp = std::fopen(path.string().c_str(), "r+b");
    REQUIRE(fp != nullptr);
    std::fputc('X', fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(lc::read_checkpoint(path), lc::IoError);
  fs::remove(path);
}
