#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesioncascade/morphology.hpp"
#include "lesioncascade/random.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

struct Sample {
  std::string id;
  Tensor image;     // [3,H,W], values in [0,1]
  BinaryMask mask;  // ground-truth lesion pixels
  int label = 0;    // 1 = melanoma
};

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Synthetic dermoscopy generator settings. Lesions are star-convex blobs: an
// ellipse whose radius is modulated by a small sum of angular cosine modes.
// The irregularity ranges are the total modulation amplitude as a fraction of
// the local radius; the texture ranges are the interior colour noise stddev.
// Base colour, size, and position distributions are shared by both classes,
// so class identity is carried by border irregularity, interior texture, and
// peripheral darkening rather than by any single first-order colour cue.
struct SynthConfig {
  int count_per_class = 100;
  int image_size = 64;
  ValueRange benign_irregularity{0.02, 0.10};
  ValueRange melanoma_irregularity{0.16, 0.34};
  ValueRange benign_texture{0.010, 0.030};
  ValueRange melanoma_texture{0.050, 0.110};
  double artifact_probability = 0.3;  // hair strokes, same rate in both classes
  std::uint64_t seed = 42;

  // Checks ranges (melanoma irregularity strictly above benign), the frame
  // divisibility, and that the largest possible blob fits in the frame.
  void validate() const;
};

// Star-convex lesion outline: an ellipse (centre in continuous pixel
// coordinates, semi-axes, rotation) whose radius is modulated by cosine
// modes: r(theta) = r_ellipse(theta) * (1 + sum_i a_i cos(m_i theta + phi_i)).
// With no modes the outline is exactly the ellipse.
struct BlobSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius_x = 1.0;
  double radius_y = 1.0;
  double rotation = 0.0;
  std::vector<double> mode_amplitudes;
  std::vector<int> mode_orders;
  std::vector<double> mode_phases;

  double radius(double theta) const;
};

// A pixel (r,c) is foreground when its centre (c+0.5, r+0.5) lies within the
// outline.
BinaryMask rasterize_blob(const BlobSpec& spec, std::int64_t height, std::int64_t width);

// Benign samples first, then melanoma. Per-sample random streams are derived
// from the seed, the class, and the index within the class, so growing or
// shrinking count_per_class never changes the samples that remain.
std::vector<Sample> generate_synthetic(const SynthConfig& config);

// On-disk layout: <id><ext> images, <id>_segmentation<ext> masks (binary
// 0/255), labels.csv with header image_id,melanoma. Masks are written as
// .pgm when ext is .ppm.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                   const std::string& extension = ".png");

// Loads the layout above. A missing mask or label is reported per file into
// `warnings` and the image is skipped; an unreadable or corrupt file throws.
std::vector<Sample> load_dataset(const std::filesystem::path& dir,
                                 std::vector<std::string>* warnings = nullptr);

struct Preprocessed {
  Sample sample;                   // scaled and padded to /32 sizes
  std::int64_t orig_height = 0;    // before any transform
  std::int64_t orig_width = 0;
  std::int64_t content_height = 0;  // after scaling, before padding
  std::int64_t content_width = 0;
};

// Downscales so the longest side is at most max_extent (never upscales),
// then zero-pads bottom/right to the next multiple of 32. The content
// extents allow predictions to be mapped back to the original frame.
Preprocessed preprocess(const Sample& sample, std::int64_t max_extent = 512);

// Random horizontal/vertical flips and isotropic rescaling in [0.8, 1.2]
// (centre-cropped or zero-padded back to the input size). Output dimensions
// equal input dimensions.
Sample augment(const Sample& sample, Rng& rng);

// Grad-free helpers shared by preprocessing and evaluation.
Tensor resize_bilinear(const Tensor& chw, std::int64_t out_h, std::int64_t out_w);
BinaryMask resize_mask_nearest(const BinaryMask& mask, std::int64_t out_h,
                               std::int64_t out_w);

// Mask rendered as 0/1 class labels, row-major, for the segmentation loss.
std::vector<std::int64_t> mask_to_labels(const BinaryMask& mask);

}  // namespace lc
