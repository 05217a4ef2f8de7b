#include "lesioncascade/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "lesioncascade/errors.hpp"

namespace lc {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void check_image(const ImageU8& image, const char* what) {
  if (image.height <= 0 || image.width <= 0 ||
      (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.height * image.width * image.channels)) {
    throw IoError(std::string(what) + ": malformed image buffer");
  }
}

// --- portable pixmap family ---

// Reads the next header token, skipping whitespace and # comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = is.get()) != EOF && !std::isspace(c) && c != '#') {
    tok.push_back(static_cast<char>(c));
  }
  if (c == '#') is.unget();
  return tok;
}

std::int64_t pnm_int(std::istream& is, const std::string& path, const char* what) {
  const std::string tok = pnm_token(is);
  if (tok.empty()) throw IoError(path + ": truncated header (" + what + ")");
  try {
    return std::stoll(tok);
  } catch (const std::exception&) {
    throw IoError(path + ": invalid " + what + " '" + tok + "'");
  }
}

ImageU8 read_pnm(std::istream& is, const std::string& path) {
  const std::string magic = pnm_token(is);
  int channels;
  bool ascii;
  if (magic == "P2") {
    channels = 1;
    ascii = true;
  } else if (magic == "P3") {
    channels = 3;
    ascii = true;
  } else if (magic == "P5") {
    channels = 1;
    ascii = false;
  } else if (magic == "P6") {
    channels = 3;
    ascii = false;
  } else {
    throw IoError(path + ": unsupported pixmap magic '" + magic + "'");
  }
  ImageU8 img;
  img.channels = channels;
  img.width = pnm_int(is, path, "width");
  img.height = pnm_int(is, path, "height");
  const std::int64_t maxval = pnm_int(is, path, "maxval");
  if (img.width <= 0 || img.height <= 0) throw IoError(path + ": non-positive image size");
  if (maxval <= 0 || maxval > 255) {
    throw IoError(path + ": only 8-bit pixmaps are supported (maxval " +
                  std::to_string(maxval) + ")");
  }
  const std::size_t n = static_cast<std::size_t>(img.width * img.height * channels);
  img.pixels.resize(n);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t v = pnm_int(is, path, "pixel value");
      if (v < 0 || v > maxval) throw IoError(path + ": pixel value out of range");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  } else {
    // Exactly one whitespace byte separates the header from the raster; the
    // token reader has already consumed it.
    if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
                 static_cast<std::streamsize>(n))) {
      throw IoError(path + ": truncated pixel data");
    }
  }
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(
          std::lround(static_cast<double>(p) * 255.0 / static_cast<double>(maxval)));
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const ImageU8& image, bool color) {
  if (color && image.channels != 3) {
    throw IoError("write_image: .ppm requires a 3-channel image");
  }
  if (!color && image.channels != 1) {
    throw IoError("write_image: .pgm requires a 1-channel image");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << (color ? "P6" : "P5") << "\n"
     << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw IoError("write failure: " + path.string());
}

// --- PNG via libpng ---

ImageU8 read_png_file(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw IoError("cannot open image: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }

  ImageU8 img;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path.string());
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if ((color_type & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  img.width = static_cast<std::int64_t>(png_get_image_width(png, info));
  img.height = static_cast<std::int64_t>(png_get_image_height(png, info));
  img.channels = static_cast<int>(png_get_channels(png, info));
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": unsupported channel layout after decoding");
  }
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width * img.channels));
  row_ptrs.resize(static_cast<std::size_t>(img.height));
  const std::size_t stride = static_cast<std::size_t>(img.width * img.channels);
  for (std::int64_t r = 0; r < img.height; ++r) {
    row_ptrs[static_cast<std::size_t>(r)] = img.pixels.data() + static_cast<std::size_t>(r) * stride;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_file(const std::filesystem::path& path, const ImageU8& image) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }

  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(image.height));
  const std::size_t stride = static_cast<std::size_t>(image.width * image.channels);
  for (std::int64_t r = 0; r < image.height; ++r) {
    row_ptrs[static_cast<std::size_t>(r)] =
        const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(r) * stride);
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path.string());
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

ImageU8 read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open image: " + path.string());
  unsigned char sig[8] = {0};
  probe.read(reinterpret_cast<char*>(sig), 8);
  const std::streamsize got = probe.gcount();
  probe.close();
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
    return read_png_file(path);
  }
  if (got >= 2 && sig[0] == 0xff && sig[1] == 0xd8) {
    throw IoError(path.string() + ": JPEG input is not supported; convert to PNG or PPM");
  }
  if (got >= 2 && sig[0] == 'P' && sig[1] >= '1' && sig[1] <= '6') {
    std::ifstream is(path, std::ios::binary);
    ImageU8 img = read_pnm(is, path.string());
    check_image(img, "read_image");
    return img;
  }
  throw IoError(path.string() + ": unrecognized image format");
}

void write_image(const std::filesystem::path& path, const ImageU8& image) {
  check_image(image, "write_image");
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png_file(path, image);
  } else if (ext == ".ppm") {
    write_pnm(path, image, /*color=*/true);
  } else if (ext == ".pgm") {
    write_pnm(path, image, /*color=*/false);
  } else {
    throw IoError("write_image: unsupported extension '" + ext + "' (use .png/.ppm/.pgm)");
  }
}

Tensor image_to_tensor(const ImageU8& image) {
  check_image(image, "image_to_tensor");
  Tensor t = Tensor::zeros({image.channels, image.height, image.width});
  auto& v = t.values();
  const std::int64_t P = image.height * image.width;
  for (std::int64_t r = 0; r < image.height; ++r) {
    for (std::int64_t c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) {
        v[static_cast<std::size_t>(ch * P + r * image.width + c)] =
            static_cast<double>(image.at(r, c, ch)) / 255.0;
      }
    }
  }
  return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
  detail::require_defined(t, "tensor_to_image");
  if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3)) {
    throw ShapeError("tensor_to_image: expected [1|3,H,W], got " + shape_str(t.shape()));
  }
  ImageU8 img;
  img.channels = static_cast<int>(t.dim(0));
  img.height = t.dim(1);
  img.width = t.dim(2);
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width * img.channels));
  const std::int64_t P = img.height * img.width;
  const auto& v = t.values();
  for (std::int64_t r = 0; r < img.height; ++r) {
    for (std::int64_t c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        const double x = std::clamp(v[static_cast<std::size_t>(ch * P + r * img.width + c)], 0.0, 1.0);
        img.pixels[static_cast<std::size_t>((r * img.width + c) * img.channels + ch)] =
            static_cast<std::uint8_t>(std::lround(x * 255.0));
      }
    }
  }
  return img;
}

BinaryMask mask_from_image(const ImageU8& image) {
  check_image(image, "mask_from_image");
  BinaryMask mask(image.height, image.width);
  for (std::int64_t r = 0; r < image.height; ++r) {
    for (std::int64_t c = 0; c < image.width; ++c) {
      double v;
      if (image.channels == 1) {
        v = image.at(r, c, 0);
      } else {
        v = 0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2);
      }
      mask.set(r, c, v >= 127.5);
    }
  }
  return mask;
}

ImageU8 mask_to_image(const BinaryMask& mask) {
  ImageU8 img;
  img.channels = 1;
  img.height = mask.height;
  img.width = mask.width;
  img.pixels.resize(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    img.pixels[i] = mask.bits[i] ? 255 : 0;
  }
  return img;
}

}  // namespace lc
