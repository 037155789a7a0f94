#include "svs/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace svs {

namespace {

struct File {
  std::FILE* f = nullptr;
  ~File() {
    if (f) std::fclose(f);
  }
};

struct PngData {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<png_byte> bytes;  // rows packed, 16-bit samples big-endian

  unsigned sample(std::size_t i) const {
    if (bit_depth == 16) return (unsigned(bytes[2 * i]) << 8) | bytes[2 * i + 1];
    return bytes[i];
  }
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw ImageIoError(msg); }
void png_warn(png_structp, png_const_charp) {}

PngData read_raw(const std::filesystem::path& path) {
  File file{std::fopen(path.c_str(), "rb")};
  if (!file.f) throw ImageIoError("cannot open image: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8)) {
    throw ImageIoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  PngData out;
  try {
    png_init_io(png, file.f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t row = png_get_rowbytes(png, info);
    out.bytes.resize(row * out.height);
    std::vector<png_bytep> rows(out.height);
    for (png_uint_32 y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + y * row;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (const ImageIoError& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + ": " + e.what());
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_raw(const std::filesystem::path& path, png_uint_32 width, png_uint_32 height,
               int channels, int bit_depth, const std::vector<png_byte>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File file{std::fopen(path.c_str(), "wb")};
  if (!file.f) throw ImageIoError("cannot write image: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, file.f);
    png_set_IHDR(png, info, width, height, bit_depth,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row = std::size_t(width) * channels * (bit_depth / 8);
    for (png_uint_32 y = 0; y < height; ++y) {
      png_write_row(png, const_cast<png_bytep>(bytes.data() + y * row));
    }
    png_write_end(png, nullptr);
  } catch (const ImageIoError& e) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError(path.string() + ": " + e.what());
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Tensor<float> read_png(const std::filesystem::path& path) {
  const PngData raw = read_raw(path);
  const Index h = raw.height, w = raw.width, plane = h * w;
  const float maxv = raw.bit_depth == 16 ? 65535.0f : 255.0f;
  Tensor<float> out({3, h, w});
  for (Index p = 0; p < plane; ++p)
    for (Index c = 0; c < 3; ++c) {
      const Index src = raw.channels == 1 ? p : p * raw.channels + c;
      out[c * plane + p] = static_cast<float>(raw.sample(src)) / maxv;
    }
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("write_png: expected [1,H,W] or [3,H,W], got " + to_string(image.shape()));
  }
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2), plane = h * w;
  std::vector<png_byte> bytes(c * plane);
  for (Index p = 0; p < plane; ++p)
    for (Index ch = 0; ch < c; ++ch) {
      const float v = std::clamp(image[ch * plane + p], 0.0f, 1.0f);
      bytes[p * c + ch] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
  write_raw(path, w, h, static_cast<int>(c), 8, bytes);
}

void write_depth_png(const std::filesystem::path& path, const Tensor<float>& depth) {
  const Index h = depth.dim(-2), w = depth.dim(-1);
  if (depth.numel() != h * w) throw ShapeError("write_depth_png: expected a single-channel map");
  std::vector<png_byte> bytes(2 * h * w);
  for (Index p = 0; p < h * w; ++p) {
    const double v = std::clamp(std::round(depth[p] * kDepthPngScale), 0.0, 65535.0);
    const auto q = static_cast<unsigned>(v);
    bytes[2 * p] = static_cast<png_byte>(q >> 8);
    bytes[2 * p + 1] = static_cast<png_byte>(q & 0xff);
  }
  write_raw(path, w, h, 1, 16, bytes);
}

Tensor<float> read_depth_png(const std::filesystem::path& path) {
  const PngData raw = read_raw(path);
  if (raw.channels != 1 || raw.bit_depth != 16) {
    throw ImageIoError("depth PNG must be 16-bit grayscale: " + path.string());
  }
  const Index h = raw.height, w = raw.width;
  Tensor<float> out({1, h, w});
  for (Index p = 0; p < h * w; ++p) {
    out[p] = static_cast<float>(raw.sample(p) / kDepthPngScale);
  }
  return out;
}

Tensor<float> quantize_8bit(const Tensor<float>& image) {
  Tensor<float> out(image.shape());
  for (Index i = 0; i < image.numel(); ++i) {
    out[i] = static_cast<float>(std::lround(std::clamp(image[i], 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
  return out;
}

}  // namespace svs
