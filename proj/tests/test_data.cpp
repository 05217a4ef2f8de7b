#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "lesioncascade/data.hpp"
#include "lesioncascade/errors.hpp"
#include "lesioncascade/image_io.hpp"
#include "lesioncascade/random.hpp"
#include "testing/oracles.hpp"

using namespace lc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("lc_data_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double image_mean(const Tensor& image) {
  double acc = 0.0;
  for (double v : image.values()) acc += v;
  return acc / static_cast<double>(image.numel());
}

// Perimeter-squared over area, scale free; higher for wigglier outlines.
double boundary_complexity(const BinaryMask& mask) {
  std::int64_t boundary = 0;
  for (std::int64_t r = 0; r < mask.height; ++r) {
    for (std::int64_t c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      const bool edge = r == 0 || r == mask.height - 1 || c == 0 || c == mask.width - 1 ||
                        !mask.at(r - 1, c) || !mask.at(r + 1, c) || !mask.at(r, c - 1) ||
                        !mask.at(r, c + 1);
      if (edge) ++boundary;
    }
  }
  const double area = static_cast<double>(mask.count());
  return static_cast<double>(boundary) * static_cast<double>(boundary) / area;
}

}  // namespace

TEST_CASE("rasterized ellipse matches analytic membership away from the boundary") {
  BlobSpec spec;
  spec.center_x = 16.25;
  spec.center_y = 14.75;
  spec.radius_x = 9.0;
  spec.radius_y = 6.0;
  spec.rotation = 0.35;
  BinaryMask mask = rasterize_blob(spec, 32, 32);

  const double cr = std::cos(spec.rotation), sr = std::sin(spec.rotation);
  std::int64_t checked = 0;
  for (std::int64_t r = 0; r < 32; ++r) {
    for (std::int64_t c = 0; c < 32; ++c) {
      const double px = static_cast<double>(c) + 0.5 - spec.center_x;
      const double py = static_cast<double>(r) + 0.5 - spec.center_y;
      const double u = (px * cr + py * sr) / spec.radius_x;
      const double v = (-px * sr + py * cr) / spec.radius_y;
      const double rho = std::sqrt(u * u + v * v);
      // Skip a band around the outline where pixel-centre quantization
      // legitimately differs from the analytic ellipse.
      if (std::abs(rho - 1.0) < 0.08) continue;
      ++checked;
      CHECK(mask.at(r, c) == (rho < 1.0));
    }
  }
  CHECK(checked > 900);
}

TEST_CASE("blob radius with no modes is the ellipse radius") {
  BlobSpec spec;
  spec.radius_x = 5.0;
  spec.radius_y = 5.0;
  CHECK(spec.radius(0.7) == doctest::Approx(5.0).epsilon(1e-12));

  spec.mode_amplitudes = {0.25};
  spec.mode_orders = {3};
  spec.mode_phases = {0.0};
  // r(0) = 5 * (1 + 0.25 cos 0) = 6.25
  CHECK(spec.radius(0.0) == doctest::Approx(6.25).epsilon(1e-12));
}

TEST_CASE("generator is deterministic and per-class streams are stable") {
  SynthConfig cfg;
  cfg.count_per_class = 6;
  cfg.seed = 123;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].image.values() == b[i].image.values());
    CHECK(a[i].mask == b[i].mask);
  }

  // Growing the per-class count must not change the samples that remain.
  SynthConfig bigger = cfg;
  bigger.count_per_class = 9;
  auto c = generate_synthetic(bigger);
  REQUIRE(c.size() == 18);
  for (int i = 0; i < 6; ++i) {
    CHECK(a[static_cast<std::size_t>(i)].image.values() ==
          c[static_cast<std::size_t>(i)].image.values());  // benign block
    CHECK(a[static_cast<std::size_t>(6 + i)].image.values() ==
          c[static_cast<std::size_t>(9 + i)].image.values());  // melanoma block
  }
}

TEST_CASE("generator output is well formed") {
  SynthConfig cfg;
  cfg.count_per_class = 25;
  cfg.seed = 7;
  auto samples = generate_synthetic(cfg);
  REQUIRE(samples.size() == 50);

  std::set<std::string> ids;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    CHECK(s.label == (i < 25 ? 0 : 1));  // benign block first
    CHECK(ids.insert(s.id).second);
    REQUIRE(s.image.shape() == Shape{3, 64, 64});
    CHECK(s.mask.height == 64);
    CHECK(s.mask.width == 64);
    for (double v : s.image.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const double fraction =
        static_cast<double>(s.mask.count()) / static_cast<double>(64 * 64);
    CHECK(fraction > 0.05);
    CHECK(fraction < 0.60);
  }
}

TEST_CASE("melanoma outlines are measurably more irregular than benign ones") {
  SynthConfig cfg;
  cfg.count_per_class = 40;
  cfg.seed = 11;
  auto samples = generate_synthetic(cfg);
  double benign = 0.0, melanoma = 0.0;
  for (const Sample& s : samples) {
    (s.label ? melanoma : benign) += boundary_complexity(s.mask);
  }
  CHECK(melanoma / 40.0 > benign / 40.0);
}

TEST_CASE("whole-image mean colour alone does not separate the classes") {
  SynthConfig cfg;
  cfg.count_per_class = 250;
  cfg.seed = 42;
  auto samples = generate_synthetic(cfg);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const Sample& s : samples) {
    scores.push_back(image_mean(s.image));
    labels.push_back(s.label);
  }
  const double auc = lctest::mann_whitney_auc(scores, labels);
  CHECK(std::max(auc, 1.0 - auc) < 0.95);
}

TEST_CASE("dataset write and load round-trips, png and ppm") {
  SynthConfig cfg;
  cfg.count_per_class = 3;
  cfg.seed = 5;
  auto samples = generate_synthetic(cfg);

  for (const std::string ext : {std::string(".png"), std::string(".ppm")}) {
    fs::path dir = temp_dir("roundtrip" + ext.substr(1));
    write_dataset(dir, samples, ext);
    std::vector<std::string> warnings;
    auto loaded = load_dataset(dir, &warnings);
    CHECK(warnings.empty());
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      CHECK(loaded[i].id == samples[i].id);
      CHECK(loaded[i].label == samples[i].label);
      CHECK(loaded[i].mask == samples[i].mask);
      // Images go through 8-bit quantization; values must match within half
      // a quantization step.
      const auto& a = loaded[i].image.values();
      const auto& b = samples[i].image.values();
      REQUIRE(a.size() == b.size());
      double worst = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a[j] - b[j]));
      CHECK(worst <= 0.5 / 255.0 + 1e-12);
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("loader reports missing masks and labels but keeps going") {
  SynthConfig cfg;
  cfg.count_per_class = 2;
  cfg.seed = 9;
  auto samples = generate_synthetic(cfg);
  fs::path dir = temp_dir("warnings");
  write_dataset(dir, samples, ".png");

  // Drop one mask and delete one labels row.
  fs::remove(dir / (samples[1].id + "_segmentation.png"));
  {
    std::ifstream in(dir / "labels.csv");
    std::string line, out;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    std::ofstream os(dir / "labels.csv", std::ios::trunc);
    for (const std::string& l : lines) {
      if (l.find(samples[2].id) == std::string::npos) os << l << "\n";
    }
  }

  std::vector<std::string> warnings;
  auto loaded = load_dataset(dir, &warnings);
  CHECK(loaded.size() == 2);
  REQUIRE(warnings.size() == 2);
  bool saw_mask = false, saw_label = false;
  for (const std::string& w : warnings) {
    if (w.find(samples[1].id) != std::string::npos) saw_mask = true;
    if (w.find(samples[2].id) != std::string::npos) saw_label = true;
  }
  CHECK(saw_mask);
  CHECK(saw_label);
  fs::remove_all(dir);
}

TEST_CASE("loader rejects corrupt image files") {
  fs::path dir = temp_dir("corrupt");
  {
    std::ofstream os(dir / "bad.png", std::ios::binary);
    os << "not a png at all";
  }
  {
    std::ofstream os(dir / "labels.csv");
    os << "image_id,melanoma\nbad,0\n";
  }
  {
    std::ofstream os(dir / "bad_segmentation.png", std::ios::binary);
    os << "also not a png";
  }
  CHECK_THROWS_AS(load_dataset(dir, nullptr), IoError);
  fs::remove_all(dir);
}

TEST_CASE("labels outside {0,1} are rejected") {
  SynthConfig cfg;
  cfg.count_per_class = 1;
  cfg.seed = 3;
  auto samples = generate_synthetic(cfg);
  fs::path dir = temp_dir("badlabel");
  write_dataset(dir, samples, ".png");
  {
    std::ofstream os(dir / "labels.csv", std::ios::trunc);
    os << "image_id,melanoma\n";
    os << samples[0].id << ",2\n";
    os << samples[1].id << ",1\n";
  }
  CHECK_THROWS_AS(load_dataset(dir, nullptr), IoError);
  fs::remove_all(dir);
}

TEST_CASE("preprocess only downscales and pads to multiples of 32") {
  SUBCASE("small input is untouched") {
    SynthConfig cfg;
    cfg.count_per_class = 1;
    cfg.seed = 2;
    auto samples = generate_synthetic(cfg);
    Preprocessed p = preprocess(samples[0], 512);
    CHECK(p.sample.image.values() == samples[0].image.values());
    CHECK(p.sample.mask == samples[0].mask);
    CHECK(p.orig_height == 64);
    CHECK(p.content_height == 64);
    CHECK(p.content_width == 64);
  }

  SUBCASE("large input lands on the content extents and /32 padding") {
    Sample s;
    s.id = "big";
    s.label = 0;
    s.image = Tensor::full({3, 100, 300}, 0.25);
    s.mask = BinaryMask(100, 300);
    for (std::int64_t r = 40; r < 60; ++r)
      for (std::int64_t c = 100; c < 200; ++c) s.mask.set(r, c, true);

    Preprocessed p = preprocess(s, 150);
    // Scale 150/300: content 50x150, padded to 64x160.
    CHECK(p.content_height == 50);
    CHECK(p.content_width == 150);
    CHECK(p.sample.image.shape() == Shape{3, 64, 160});
    CHECK(p.sample.mask.height == 64);
    CHECK(p.sample.mask.width == 160);
    CHECK(p.orig_height == 100);
    CHECK(p.orig_width == 300);

    // Padding area is zero image and background mask.
    for (std::int64_t r = 50; r < 64; ++r)
      for (std::int64_t c = 0; c < 160; ++c) {
        CHECK(p.sample.image.at({0, r, c}) == 0.0);
        CHECK_FALSE(p.sample.mask.at(r, c));
      }

    // Mask area scales with the square of the zoom factor, within a band.
    const double orig_fraction = 20.0 * 100.0 / (100.0 * 300.0);
    const double content_fraction =
        static_cast<double>(p.sample.mask.count()) / (50.0 * 150.0);
    CHECK(content_fraction == doctest::Approx(orig_fraction).epsilon(0.10));
  }
}

TEST_CASE("augment preserves shape, label, and binarity") {
  SynthConfig cfg;
  cfg.count_per_class = 2;
  cfg.seed = 21;
  auto samples = generate_synthetic(cfg);
  Rng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const Sample& s = samples[static_cast<std::size_t>(rep) % samples.size()];
    Sample out = augment(s, rng);
    CHECK(out.label == s.label);
    CHECK(out.image.shape() == s.image.shape());
    CHECK(out.mask.height == s.mask.height);
    CHECK(out.mask.width == s.mask.width);
    for (double v : out.image.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("augment applies the same geometry to image and mask") {
  // Encode the mask into an image channel; after augmentation the channel
  // must still agree with the transformed mask wherever the mask is set.
  Sample s;
  s.id = "grid";
  s.label = 1;
  s.image = Tensor::zeros({3, 32, 32});
  s.mask = BinaryMask(32, 32);
  for (std::int64_t r = 8; r < 24; ++r)
    for (std::int64_t c = 10; c < 20; ++c) {
      s.mask.set(r, c, true);
      s.image.values()[static_cast<std::size_t>(r * 32 + c)] = 1.0;
    }

  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    Sample out = augment(s, rng);
    std::int64_t disagreements = 0;
    for (std::int64_t r = 0; r < 32; ++r)
      for (std::int64_t c = 0; c < 32; ++c) {
        const bool bright = out.image.at({0, r, c}) > 0.5;
        if (bright != out.mask.at(r, c)) ++disagreements;
      }
    // Bilinear image interpolation vs nearest mask resampling can disagree
    // only along the rectangle outline.
    CHECK(disagreements <= 140);
  }
}

TEST_CASE("augment is deterministic under a fixed stream") {
  SynthConfig cfg;
  cfg.count_per_class = 1;
  cfg.seed = 77;
  auto samples = generate_synthetic(cfg);
  Rng r1(1234), r2(1234);
  Sample a = augment(samples[0], r1);
  Sample b = augment(samples[0], r2);
  CHECK(a.image.values() == b.image.values());
  CHECK(a.mask == b.mask);
}

TEST_CASE("mask_to_labels flattens row-major") {
  BinaryMask m(2, 3);
  m.set(0, 1, true);
  m.set(1, 2, true);
  CHECK(mask_to_labels(m) == std::vector<std::int64_t>{0, 1, 0, 0, 0, 1});
}

TEST_CASE("resize helpers: identity and downscale") {
  Tensor img = Tensor::from_values({1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
  Tensor same = resize_bilinear(img, 2, 2);
  CHECK(same.values() == img.values());

  BinaryMask m(4, 4);
  m.set(0, 0, true);
  m.set(0, 1, true);
  m.set(1, 0, true);
  m.set(1, 1, true);
  BinaryMask half = resize_mask_nearest(m, 2, 2);
  CHECK(half.count() == 1);
  CHECK(half.at(0, 0));
}

TEST_CASE("image files round-trip through png and the pixmap family") {
  ImageU8 rgb;
  rgb.height = 3;
  rgb.width = 2;
  rgb.channels = 3;
  rgb.pixels = {0,   10,  20,  30,  40,  50,  60,  70,  80,
                90,  100, 110, 120, 130, 140, 250, 251, 252};
  ImageU8 gray;
  gray.height = 2;
  gray.width = 2;
  gray.channels = 1;
  gray.pixels = {0, 127, 128, 255};

  fs::path dir = temp_dir("imageio");
  for (const char* name : {"a.png", "a.ppm"}) {
    fs::path p = dir / name;
    write_image(p, rgb);
    ImageU8 back = read_image(p);
    CHECK(back.height == rgb.height);
    CHECK(back.width == rgb.width);
    CHECK(back.channels == 3);
    CHECK(back.pixels == rgb.pixels);
  }
  for (const char* name : {"g.png", "g.pgm"}) {
    fs::path p = dir / name;
    write_image(p, gray);
    ImageU8 back = read_image(p);
    CHECK(back.channels == 1);
    CHECK(back.pixels == gray.pixels);
  }
  fs::remove_all(dir);
}

TEST_CASE("ascii pixmaps with comments are readable") {
  fs::path dir = temp_dir("ascii");
  fs::path p = dir / "c.pgm";
  {
    std::ofstream os(p);
    os << "P2\n# a comment line\n2 2\n# another\n255\n0 64\n128 255\n";
  }
  ImageU8 img = read_image(p);
  REQUIRE(img.channels == 1);
  CHECK(img.pixels == std::vector<std::uint8_t>{0, 64, 128, 255});

  fs::path p3 = dir / "c.ppm";
  {
    std::ofstream os(p3);
    os << "P3\n2 1\n255\n1 2 3 4 5 6\n";
  }
  ImageU8 rgb = read_image(p3);
  REQUIRE(rgb.channels == 3);
  CHECK(rgb.pixels == std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
  fs::remove_all(dir);
}

TEST_CASE("jpeg input is rejected with a clear message") {
  fs::path dir = temp_dir("jpeg");
  fs::path p = dir / "x.jpg";
  {
    std::ofstream os(p, std::ios::binary);
    const unsigned char soi[] = {0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10, 'J', 'F', 'I', 'F'};
    os.write(reinterpret_cast<const char*>(soi), sizeof(soi));
  }
  bool threw = false;
  try {
    read_image(p);
  } catch (const IoError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("JPEG") != std::string::npos);
  }
  CHECK(threw);
  fs::remove_all(dir);
}

TEST_CASE("tensor conversion normalizes to [0,1] and back") {
  ImageU8 img;
  img.height = 1;
  img.width = 2;
  img.channels = 3;
  img.pixels = {0, 255, 51, 102, 153, 204};
  Tensor t = image_to_tensor(img);
  REQUIRE(t.shape() == Shape{3, 1, 2});
  CHECK(t.at({0, 0, 0}) == doctest::Approx(0.0));
  CHECK(t.at({1, 0, 0}) == doctest::Approx(1.0));
  CHECK(t.at({0, 0, 1}) == doctest::Approx(102.0 / 255.0));

  ImageU8 back = tensor_to_image(t);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("mask images binarize at 128") {
  ImageU8 img;
  img.height = 1;
  img.width = 4;
  img.channels = 1;
  img.pixels = {0, 127, 128, 255};
  BinaryMask m = mask_from_image(img);
  CHECK_FALSE(m.at(0, 0));
  CHECK_FALSE(m.at(0, 1));
  CHECK(m.at(0, 2));
  CHECK(m.at(0, 3));

  ImageU8 out = mask_to_image(m);
  CHECK(out.pixels == std::vector<std::uint8_t>{0, 0, 255, 255});
}

TEST_CASE("infeasible generator configs are rejected") {
  SynthConfig cfg;
  cfg.image_size = 48;  // not divisible by 32
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  SynthConfig overlap;
  overlap.benign_irregularity = {0.05, 0.20};
  overlap.melanoma_irregularity = {0.15, 0.30};  // ranges overlap
  CHECK_THROWS_AS(overlap.validate(), ConfigError);

  SynthConfig inverted;
  inverted.benign_texture = {0.5, 0.1};
  CHECK_THROWS_AS(inverted.validate(), ConfigError);
}
