#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lesioncascade/morphology.hpp"
#include "lesioncascade/tensor.hpp"

namespace lc {

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
  std::int64_t height = 0;
  std::int64_t width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::int64_t r, std::int64_t c, int ch) const {
    return pixels[static_cast<std::size_t>((r * width + c) * channels + ch)];
  }
};

// Reads PNG or any of the portable pixmap family (P2/P3 ASCII, P5/P6 binary,
// 8-bit). The format is detected from the file contents, not the extension.
// JPEG input is rejected with a clear error.
ImageU8 read_image(const std::filesystem::path& path);

// Writes by extension: .png, .ppm (RGB only), .pgm (gray only).
void write_image(const std::filesystem::path& path, const ImageU8& image);

// [C,H,W] tensor with values in [0,1].
Tensor image_to_tensor(const ImageU8& image);

// Inverse of image_to_tensor; values are clamped to [0,1] and rounded.
ImageU8 tensor_to_image(const Tensor& t /*[C,H,W]*/);

// Foreground where the (luminance) value is >= 128.
BinaryMask mask_from_image(const ImageU8& image);

// 0/255 single-channel rendering.
ImageU8 mask_to_image(const BinaryMask& mask);

}  // namespace lc
