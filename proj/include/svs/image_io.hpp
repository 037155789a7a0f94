#pragma once

// PNG input/output. Colour images are 8-bit on disk and [C,H,W] floats in
// [0,1] in memory; depth maps are 16-bit grayscale storing metres * 256.

#include "svs/tensor.hpp"

#include <filesystem>

namespace svs {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDepthPngScale = 256.0;

/// Reads an 8- or 16-bit PNG as [3,H,W] (gray is replicated, alpha dropped).
Tensor<float> read_png(const std::filesystem::path& path);

/// Writes [1,H,W] or [3,H,W] values in [0,1] (clamped) as 8-bit PNG.
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

/// Depth in metres -> 16-bit PNG of round(depth * 256), saturating at 65535.
void write_depth_png(const std::filesystem::path& path, const Tensor<float>& depth);
/// Inverse of write_depth_png: [1,H,W] metres.
Tensor<float> read_depth_png(const std::filesystem::path& path);

/// Rounds every value to the nearest k/255, as an 8-bit round trip would.
Tensor<float> quantize_8bit(const Tensor<float>& image);

}  // namespace svs
