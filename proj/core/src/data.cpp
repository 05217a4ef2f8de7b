#include "lesioncascade/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lesioncascade/errors.hpp"
#include "lesioncascade/image_io.hpp"
#include "lesioncascade/ops.hpp"

namespace lc {

namespace {

// Geometry constants shared by the generator and the feasibility check.
// Fractions are of the frame side.
constexpr double kCenterLo = 0.46, kCenterHi = 0.54;
constexpr double kBaseRadiusLo = 0.16, kBaseRadiusHi = 0.26;
constexpr double kAspectLo = 0.85, kAspectHi = 1.18;
constexpr double kBackgroundNoise = 0.012;

double smoothstep(double a, double b, double x) {
  const double u = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

struct Rgb {
  double r, g, b;
};

void check_range(const ValueRange& r, const char* name) {
  if (!(r.lo >= 0.0) || !(r.hi >= r.lo)) {
    throw ConfigError(std::string("synthetic config: invalid range for ") + name);
  }
}

}  // namespace

double BlobSpec::radius(double theta) const {
  const double t = theta - rotation;
  const double ct = std::cos(t), st = std::sin(t);
  // Polar form of the ellipse about its centre.
  const double base =
      radius_x * radius_y /
      std::sqrt(radius_y * radius_y * ct * ct + radius_x * radius_x * st * st);
  double mod = 1.0;
  for (std::size_t i = 0; i < mode_amplitudes.size(); ++i) {
    mod += mode_amplitudes[i] * std::cos(mode_orders[i] * theta + mode_phases[i]);
  }
  return base * mod;
}

BinaryMask rasterize_blob(const BlobSpec& spec, std::int64_t height, std::int64_t width) {
  BinaryMask mask(height, width);
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      const double dx = (static_cast<double>(c) + 0.5) - spec.center_x;
      const double dy = (static_cast<double>(r) + 0.5) - spec.center_y;
      const double rho = std::hypot(dx, dy);
      mask.set(r, c, rho <= spec.radius(std::atan2(dy, dx)));
    }
  }
  return mask;
}

void SynthConfig::validate() const {
  if (count_per_class < 0) throw ConfigError("synthetic config: count_per_class must be >= 0");
  if (image_size < 32) throw ConfigError("synthetic config: image_size must be at least 32");
  if (image_size % 32 != 0) {
    throw ConfigError("synthetic config: image_size must be divisible by 32");
  }
  check_range(benign_irregularity, "benign_irregularity");
  check_range(melanoma_irregularity, "melanoma_irregularity");
  check_range(benign_texture, "benign_texture");
  check_range(melanoma_texture, "melanoma_texture");
  if (!(melanoma_irregularity.lo > benign_irregularity.hi)) {
    throw ConfigError(
        "synthetic config: the melanoma irregularity range must lie strictly above "
        "the benign range");
  }
  if (artifact_probability < 0.0 || artifact_probability > 1.0) {
    throw ConfigError("synthetic config: artifact_probability must be in [0,1]");
  }
  const double s = static_cast<double>(image_size);
  const double max_radius = kBaseRadiusHi * kAspectHi * s * (1.0 + melanoma_irregularity.hi);
  const double available = kCenterLo * s - 2.0;
  if (max_radius > available) {
    throw ConfigError("synthetic config: a lesion of radius up to " +
                      std::to_string(max_radius) + " px cannot fit in a " +
                      std::to_string(image_size) + "x" + std::to_string(image_size) +
                      " frame");
  }
}

namespace {

Sample make_sample(const SynthConfig& cfg, int label, std::uint64_t index_in_class) {
  // Per-class streams: changing count_per_class leaves every other sample
  // unchanged.
  Rng rng(Rng::mix(Rng::mix(cfg.seed, 0x10ad + static_cast<std::uint64_t>(label)),
                   index_in_class));
  const std::int64_t S = cfg.image_size;
  const double sd = static_cast<double>(S);

  BlobSpec blob;
  blob.center_x = rng.uniform(kCenterLo, kCenterHi) * sd;
  blob.center_y = rng.uniform(kCenterLo, kCenterHi) * sd;
  const double r0 = rng.uniform(kBaseRadiusLo, kBaseRadiusHi) * sd;
  const double aspect = rng.uniform(kAspectLo, kAspectHi);
  blob.radius_x = r0 * aspect;
  blob.radius_y = r0 / aspect;
  blob.rotation = rng.uniform(0.0, 3.14159265358979323846);

  const ValueRange& irr = label ? cfg.melanoma_irregularity : cfg.benign_irregularity;
  const double total_amp = rng.uniform(irr.lo, irr.hi);
  const int max_mode = label ? 6 : 4;
  std::vector<double> weights;
  double weight_sum = 0.0;
  for (int m = 2; m <= max_mode; ++m) {
    const double w = rng.uniform(0.2, 1.0);
    weights.push_back(w);
    weight_sum += w;
  }
  for (int m = 2; m <= max_mode; ++m) {
    blob.mode_orders.push_back(m);
    blob.mode_amplitudes.push_back(total_amp * weights[static_cast<std::size_t>(m - 2)] /
                                   weight_sum);
    blob.mode_phases.push_back(rng.uniform(0.0, 6.283185307179586));
  }

  Rgb skin;
  skin.r = rng.uniform(0.75, 0.88);
  skin.g = skin.r - rng.uniform(0.10, 0.18);
  skin.b = skin.g - rng.uniform(0.04, 0.10);

  // Both classes share one pigment hue; they differ in how much of it the
  // lesion carries. Benign lesions are pale, low-contrast spots with a soft
  // border, melanoma lesions are heavily pigmented with a sharp border (plus
  // the rim and blotches added below), so the border appearance regimes of
  // the two classes are genuinely different and a per-pixel classifier that
  // knows the diagnosis has an edge over one that does not.
  Rgb pigment;
  pigment.r = rng.uniform(0.28, 0.40);
  pigment.g = pigment.r * rng.uniform(0.60, 0.75);
  pigment.b = pigment.g * rng.uniform(0.55, 0.75);
  const double pigment_load = label ? rng.uniform(0.60, 0.85) : rng.uniform(0.28, 0.48);
  Rgb lesion;
  lesion.r = skin.r + (pigment.r - skin.r) * pigment_load;
  lesion.g = skin.g + (pigment.g - skin.g) * pigment_load;
  lesion.b = skin.b + (pigment.b - skin.b) * pigment_load;
  const double edge_blend = label ? rng.uniform(0.8, 1.6) : rng.uniform(1.8, 3.2);

  const ValueRange& tex = label ? cfg.melanoma_texture : cfg.benign_texture;
  const double texture_sigma = rng.uniform(tex.lo, tex.hi);

  // Global exposure jitter, same distribution for both classes: absolute
  // brightness is unreliable, so class evidence has to live in structure
  // (border contrast, rim, blotches) rather than in the image mean.
  const double exposure = rng.uniform(0.85, 1.15);

  // Melanoma structure: a few interior tone patches and a darker rim.
  struct Patch {
    double x, y, sigma, amp;
  };
  std::vector<Patch> patches;
  double rim_darkening = 0.0;
  if (label) {
    // Tone blotches and the darker rim are deliberately broad: they are the
    // class evidence that must survive the downsampling to the network's
    // feature grid, unlike the fine texture noise below. Blotch amplitudes
    // straddle zero so melanoma interiors mix darker and lighter tones.
    const int n_patches = static_cast<int>(rng.uniform_int(2, 5));
    for (int j = 0; j < n_patches; ++j) {
      const double dir = rng.uniform(0.0, 6.283185307179586);
      const double dist = rng.uniform(0.0, 0.55) * blob.radius(dir);
      Patch p;
      p.x = blob.center_x + dist * std::cos(dir);
      p.y = blob.center_y + dist * std::sin(dir);
      p.sigma = rng.uniform(0.18, 0.38) * r0;
      p.amp = rng.uniform(-0.35, 0.18);
      patches.push_back(p);
    }
    rim_darkening = rng.uniform(0.25, 0.45);
  }

  Sample sample;
  sample.label = label;
  sample.mask = BinaryMask(S, S);
  sample.image = Tensor::zeros({3, S, S});
  auto& pix = sample.image.values();
  const std::int64_t P = S * S;
  const double half = sd / 2.0;

  for (std::int64_t r = 0; r < S; ++r) {
    for (std::int64_t c = 0; c < S; ++c) {
      const double px = static_cast<double>(c) + 0.5;
      const double py = static_cast<double>(r) + 0.5;
      const double dx = px - blob.center_x;
      const double dy = py - blob.center_y;
      const double rho = std::hypot(dx, dy);
      const double rim = blob.radius(std::atan2(dy, dx));
      const bool inside = rho <= rim;
      sample.mask.set(r, c, inside);

      Rgb colour = lesion;
      if (label) {
        double tone = 0.0;
        for (const Patch& p : patches) {
          const double d2 = (px - p.x) * (px - p.x) + (py - p.y) * (py - p.y);
          tone += p.amp * std::exp(-d2 / (2.0 * p.sigma * p.sigma));
        }
        const double rim_term =
            1.0 - rim_darkening * smoothstep(0.62, 1.0, rho / std::max(rim, 1e-9));
        colour.r *= (1.0 + tone) * rim_term;
        colour.g *= (1.0 + tone) * rim_term;
        colour.b *= (1.0 + tone) * rim_term;
      }

      // Soft colour transition across the border; the mask itself is hard.
      const double t = std::clamp((rim - rho) / edge_blend + 0.5, 0.0, 1.0);
      Rgb out;
      out.r = skin.r + (colour.r - skin.r) * t;
      out.g = skin.g + (colour.g - skin.g) * t;
      out.b = skin.b + (colour.b - skin.b) * t;

      // Gentle radial illumination falloff.
      const double vr = (px - half) / half;
      const double vc = (py - half) / half;
      const double vignette = 1.0 - 0.06 * (vr * vr + vc * vc) * 0.5;

      // One luminance-correlated noise draw per pixel, class-scaled inside.
      const double n = rng.normal();
      const double sigma = inside ? texture_sigma : kBackgroundNoise;
      const double gain = exposure * vignette * (1.0 + sigma * n);
      const std::size_t base = static_cast<std::size_t>(r * S + c);
      pix[base] = std::clamp(out.r * gain, 0.0, 1.0);
      pix[static_cast<std::size_t>(P) + base] = std::clamp(out.g * gain, 0.0, 1.0);
      pix[static_cast<std::size_t>(2 * P) + base] = std::clamp(out.b * gain, 0.0, 1.0);
    }
  }

  // Hair-like strokes, drawn over everything; the ground-truth mask ignores
  // them, as scanner artifacts do not change the lesion extent.
  if (rng.bernoulli(cfg.artifact_probability)) {
    const int n_hairs = static_cast<int>(rng.uniform_int(1, 3));
    for (int hair = 0; hair < n_hairs; ++hair) {
      auto edge_point = [&](double* x, double* y) {
        const int side = static_cast<int>(rng.uniform_index(4));
        const double along = rng.uniform(0.0, sd);
        switch (side) {
          case 0: *x = along; *y = 0.0; break;
          case 1: *x = along; *y = sd - 1.0; break;
          case 2: *x = 0.0; *y = along; break;
          default: *x = sd - 1.0; *y = along; break;
        }
      };
      double x0, y0, x2, y2;
      edge_point(&x0, &y0);
      edge_point(&x2, &y2);
      const double x1 = rng.uniform(0.2, 0.8) * sd;
      const double y1 = rng.uniform(0.2, 0.8) * sd;
      const double shade = rng.uniform(0.08, 0.22);
      const Rgb hair_colour{std::min(1.0, shade * 1.2), shade * 0.95, shade * 0.75};
      const double thickness = rng.uniform(0.6, 1.1);
      const int steps = static_cast<int>(sd) * 3;
      for (int i = 0; i <= steps; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(steps);
        const double v = 1.0 - u;
        const double bx = v * v * x0 + 2.0 * v * u * x1 + u * u * x2;
        const double by = v * v * y0 + 2.0 * v * u * y1 + u * u * y2;
        const std::int64_t lo_c = std::max<std::int64_t>(0, static_cast<std::int64_t>(bx - 2));
        const std::int64_t hi_c = std::min<std::int64_t>(S - 1, static_cast<std::int64_t>(bx + 2));
        const std::int64_t lo_r = std::max<std::int64_t>(0, static_cast<std::int64_t>(by - 2));
        const std::int64_t hi_r = std::min<std::int64_t>(S - 1, static_cast<std::int64_t>(by + 2));
        for (std::int64_t rr = lo_r; rr <= hi_r; ++rr) {
          for (std::int64_t cc = lo_c; cc <= hi_c; ++cc) {
            const double d = std::hypot(static_cast<double>(cc) + 0.5 - bx,
                                        static_cast<double>(rr) + 0.5 - by);
            if (d > thickness) continue;
            const double alpha = 0.85 * (1.0 - d / thickness * 0.5);
            const std::size_t base = static_cast<std::size_t>(rr * S + cc);
            pix[base] += (hair_colour.r - pix[base]) * alpha;
            pix[static_cast<std::size_t>(P) + base] +=
                (hair_colour.g - pix[static_cast<std::size_t>(P) + base]) * alpha;
            pix[static_cast<std::size_t>(2 * P) + base] +=
                (hair_colour.b - pix[static_cast<std::size_t>(2 * P) + base]) * alpha;
          }
        }
      }
    }
  }
  return sample;
}

}  // namespace

std::vector<Sample> generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(2 * config.count_per_class));
  std::uint64_t ordinal = 0;
  char id[32];
  for (int label = 0; label <= 1; ++label) {
    for (int i = 0; i < config.count_per_class; ++i, ++ordinal) {
      Sample s = make_sample(config, label, static_cast<std::uint64_t>(i));
      std::snprintf(id, sizeof(id), "syn%06llu", static_cast<unsigned long long>(ordinal));
      s.id = id;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const std::string& extension) {
  if (extension != ".png" && extension != ".ppm") {
    throw IoError("write_dataset: extension must be .png or .ppm, got '" + extension + "'");
  }
  std::filesystem::create_directories(dir);
  const std::string mask_ext = extension == ".ppm" ? ".pgm" : extension;
  std::ofstream labels(dir / "labels.csv");
  if (!labels) throw IoError("cannot write " + (dir / "labels.csv").string());
  labels << "image_id,melanoma\n";
  for (const Sample& s : samples) {
    write_image(dir / (s.id + extension), tensor_to_image(s.image));
    write_image(dir / (s.id + "_segmentation" + mask_ext), mask_to_image(s.mask));
    labels << s.id << "," << (s.label ? 1 : 0) << "\n";
  }
  if (!labels) throw IoError("write failure on labels.csv");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  return out;
}

}  // namespace

std::vector<Sample> load_dataset(const std::filesystem::path& dir,
                                 std::vector<std::string>* warnings) {
  std::vector<std::string> local_warnings;
  std::vector<std::string>& warn = warnings ? *warnings : local_warnings;

  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset directory does not exist: " + dir.string());
  }
  const std::filesystem::path labels_path = dir / "labels.csv";
  std::ifstream labels_file(labels_path);
  if (!labels_file) throw IoError("missing labels file: " + labels_path.string());

  std::string line;
  if (!std::getline(labels_file, line)) throw IoError(labels_path.string() + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  std::ptrdiff_t id_col = -1, label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "image_id") id_col = static_cast<std::ptrdiff_t>(i);
    if (header[i] == "melanoma") label_col = static_cast<std::ptrdiff_t>(i);
  }
  if (id_col < 0 || label_col < 0) {
    throw IoError(labels_path.string() + ": header must contain image_id and melanoma columns");
  }
  std::map<std::string, int> labels;
  std::size_t line_no = 1;
  while (std::getline(labels_file, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<std::ptrdiff_t>(fields.size()) <= std::max(id_col, label_col)) {
      throw IoError(labels_path.string() + ": malformed row at line " + std::to_string(line_no));
    }
    const std::string& value = fields[static_cast<std::size_t>(label_col)];
    if (value != "0" && value != "1") {
      throw IoError(labels_path.string() + ": melanoma column must be 0 or 1 at line " +
                    std::to_string(line_no));
    }
    labels[fields[static_cast<std::size_t>(id_col)]] = value == "1" ? 1 : 0;
  }

  const std::vector<std::string> image_exts = {".png", ".ppm", ".pgm"};
  auto is_image_ext = [&](std::string ext) {
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return std::find(image_exts.begin(), image_exts.end(), ext) != image_exts.end();
  };
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };

  std::vector<std::filesystem::path> image_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::filesystem::path& p = entry.path();
    if (!is_image_ext(p.extension().string())) continue;
    if (ends_with(p.stem().string(), "_segmentation")) continue;
    image_files.push_back(p);
  }
  std::sort(image_files.begin(), image_files.end());
  if (image_files.empty()) warn.push_back("no images found in " + dir.string());

  std::vector<Sample> samples;
  for (const auto& path : image_files) {
    const std::string id = path.stem().string();
    auto label_it = labels.find(id);
    if (label_it == labels.end()) {
      warn.push_back(id + ": no entry in labels.csv, skipped");
      continue;
    }
    std::filesystem::path mask_path;
    for (const std::string& ext : image_exts) {
      const std::filesystem::path candidate = dir / (id + "_segmentation" + ext);
      if (std::filesystem::exists(candidate)) {
        mask_path = candidate;
        break;
      }
    }
    if (mask_path.empty()) {
      warn.push_back(id + ": no segmentation mask found, skipped");
      continue;
    }

    ImageU8 raw = read_image(path);
    if (raw.channels == 1) {
      // Grayscale input: replicate into three channels.
      ImageU8 rgb;
      rgb.height = raw.height;
      rgb.width = raw.width;
      rgb.channels = 3;
      rgb.pixels.resize(raw.pixels.size() * 3);
      for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
        rgb.pixels[3 * i] = rgb.pixels[3 * i + 1] = rgb.pixels[3 * i + 2] = raw.pixels[i];
      }
      raw = std::move(rgb);
    }
    const BinaryMask mask = mask_from_image(read_image(mask_path));
    if (mask.height != raw.height || mask.width != raw.width) {
      warn.push_back(id + ": image and mask sizes differ, skipped");
      continue;
    }
    Sample s;
    s.id = id;
    s.image = image_to_tensor(raw);
    s.mask = mask;
    s.label = label_it->second;
    samples.push_back(std::move(s));
  }
  return samples;
}

Tensor resize_bilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w) {
  NoGradGuard guard;
  return upsample_bilinear(chw, out_h, out_w);
}

BinaryMask resize_mask_nearest(const BinaryMask& mask, std::int64_t out_h,
                               std::int64_t out_w) {
  BinaryMask out(out_h, out_w);
  const double step_r = out_h > 1 ? static_cast<double>(mask.height - 1) /
                                        static_cast<double>(out_h - 1)
                                  : 0.0;
  const double step_c = out_w > 1 ? static_cast<double>(mask.width - 1) /
                                        static_cast<double>(out_w - 1)
                                  : 0.0;
  for (std::int64_t r = 0; r < out_h; ++r) {
    const std::int64_t sr =
        std::min<std::int64_t>(mask.height - 1, std::llround(step_r * static_cast<double>(r)));
    for (std::int64_t c = 0; c < out_w; ++c) {
      const std::int64_t sc =
          std::min<std::int64_t>(mask.width - 1, std::llround(step_c * static_cast<double>(c)));
      out.set(r, c, mask.at(sr, sc));
    }
  }
  return out;
}

std::vector<std::int64_t> mask_to_labels(const BinaryMask& mask) {
  std::vector<std::int64_t> labels(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) labels[i] = mask.bits[i] ? 1 : 0;
  return labels;
}

Preprocessed preprocess(const Sample& sample, std::int64_t max_extent) {
  detail::require_defined(sample.image, "preprocess");
  if (max_extent < 32) throw ConfigError("preprocess: max_extent must be at least 32");
  const std::int64_t h = sample.image.dim(1);
  const std::int64_t w = sample.image.dim(2);
  if (sample.mask.height != h || sample.mask.width != w) {
    throw ShapeError("preprocess: image and mask sizes differ for sample " + sample.id);
  }

  Preprocessed out;
  out.orig_height = h;
  out.orig_width = w;

  std::int64_t ch = h, cw = w;
  const std::int64_t longest = std::max(h, w);
  Tensor image = sample.image;
  BinaryMask mask = sample.mask;
  if (longest > max_extent) {
    const double scale = static_cast<double>(max_extent) / static_cast<double>(longest);
    ch = std::max<std::int64_t>(1, std::llround(static_cast<double>(h) * scale));
    cw = std::max<std::int64_t>(1, std::llround(static_cast<double>(w) * scale));
    if (h >= w) ch = max_extent; else cw = max_extent;
    image = resize_bilinear(image, ch, cw);
    mask = resize_mask_nearest(mask, ch, cw);
  }
  out.content_height = ch;
  out.content_width = cw;

  const std::int64_t ph = (ch + 31) / 32 * 32;
  const std::int64_t pw = (cw + 31) / 32 * 32;
  if (ph != ch || pw != cw) {
    Tensor padded = Tensor::zeros({3, ph, pw});
    auto& dst = padded.values();
    const auto& src = image.values();
    for (std::int64_t ci = 0; ci < 3; ++ci) {
      for (std::int64_t r = 0; r < ch; ++r) {
        std::copy_n(src.begin() + (ci * ch + r) * cw, cw,
                    dst.begin() + (ci * ph + r) * pw);
      }
    }
    BinaryMask padded_mask(ph, pw);
    for (std::int64_t r = 0; r < ch; ++r) {
      std::copy_n(mask.bits.begin() + r * cw, cw, padded_mask.bits.begin() + r * pw);
    }
    image = padded;
    mask = padded_mask;
  }

  out.sample.id = sample.id;
  out.sample.label = sample.label;
  out.sample.image = image;
  out.sample.mask = mask;
  return out;
}

Sample augment(const Sample& sample, Rng& rng) {
  detail::require_defined(sample.image, "augment");
  const std::int64_t H = sample.image.dim(1);
  const std::int64_t W = sample.image.dim(2);
  const std::int64_t C = sample.image.dim(0);

  Sample out;
  out.id = sample.id;
  out.label = sample.label;

  // Isotropic rescale, then flips. Draw order is fixed so a given rng state
  // always produces the same transform.
  const double scale = rng.uniform(0.8, 1.2);
  const bool flip_h = rng.bernoulli(0.5);
  const bool flip_v = rng.bernoulli(0.5);

  const std::int64_t sh = std::max<std::int64_t>(1, std::llround(static_cast<double>(H) * scale));
  const std::int64_t sw = std::max<std::int64_t>(1, std::llround(static_cast<double>(W) * scale));
  Tensor scaled = (sh == H && sw == W) ? sample.image : resize_bilinear(sample.image, sh, sw);
  BinaryMask scaled_mask =
      (sh == H && sw == W) ? sample.mask : resize_mask_nearest(sample.mask, sh, sw);

  // Centre-crop when enlarged, centre-pad with zeros when shrunk.
  Tensor image = Tensor::zeros({C, H, W});
  BinaryMask mask(H, W);
  const std::int64_t off_r = (sh - H) / 2;
  const std::int64_t off_c = (sw - W) / 2;
  auto& dst = image.values();
  const auto& src = scaled.values();
  for (std::int64_t r = 0; r < H; ++r) {
    const std::int64_t srr = r + off_r;
    if (srr < 0 || srr >= sh) continue;
    for (std::int64_t c = 0; c < W; ++c) {
      const std::int64_t scc = c + off_c;
      if (scc < 0 || scc >= sw) continue;
      for (std::int64_t ci = 0; ci < C; ++ci) {
        dst[static_cast<std::size_t>((ci * H + r) * W + c)] =
            src[static_cast<std::size_t>((ci * sh + srr) * sw + scc)];
      }
      mask.set(r, c, scaled_mask.at(srr, scc));
    }
  }

  if (flip_h || flip_v) {
    Tensor flipped = Tensor::zeros({C, H, W});
    BinaryMask flipped_mask(H, W);
    auto& fv = flipped.values();
    const auto& iv = image.values();
    for (std::int64_t r = 0; r < H; ++r) {
      const std::int64_t rr = flip_v ? H - 1 - r : r;
      for (std::int64_t c = 0; c < W; ++c) {
        const std::int64_t cc = flip_h ? W - 1 - c : c;
        for (std::int64_t ci = 0; ci < C; ++ci) {
          fv[static_cast<std::size_t>((ci * H + r) * W + c)] =
              iv[static_cast<std::size_t>((ci * H + rr) * W + cc)];
        }
        flipped_mask.set(r, c, mask.at(rr, cc));
      }
    }
    image = flipped;
    mask = flipped_mask;
  }

  out.image = image;
  out.mask = mask;
  return out;
}

}  // namespace lc
