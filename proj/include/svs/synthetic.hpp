#pragma once

// Procedural layered scenes with exact geometry: fronto-parallel textured
// planes (a background wall plus rectangular foreground cards) seen by a
// rectified stereo rig that moves along a short straight track.

#include "svs/geometry.hpp"

#include <cstdint>

namespace svs {

struct SyntheticConfig {
  Index width = 64;
  Index height = 64;
  double focal = 64.0;  // fx = fy, pixels
  double baseline = 0.54;
  /// Plane count including the background wall; the rest are cards.
  int min_planes = 2;
  int max_planes = 4;
  double background_depth_min = 8.0;
  double background_depth_max = 14.0;
  double foreground_depth_min = 3.0;
  double foreground_depth_max = 7.0;
  /// Foreground card side length as a fraction of the image width.
  double card_size_min = 0.25;
  double card_size_max = 0.5;
  /// Texture: value noise with this lattice spacing in image pixels (at the
  /// plane's own depth), summed over `texture_octaves` halvings.
  double texture_cell = 20.0;
  int texture_octaves = 2;
  double texture_amplitude = 0.2;
  /// Per-channel plane base colours are drawn from this range.
  double base_color_min = 0.35;
  double base_color_max = 0.65;
  int frames = 5;
  double frame_spacing = 0.5;  // metres between consecutive frames
  Eigen::Vector3d track_direction = Eigen::Vector3d::UnitX();

  void validate() const;
  CameraModel camera() const;
};

struct TexturedPlane {
  double depth = 1.0;  // world Z
  bool unbounded = false;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;  // world extents
  Eigen::Vector3d base_color = Eigen::Vector3d::Constant(0.5);
  double cell = 0.1;  // world units per texture lattice cell
  int octaves = 2;
  double amplitude = 0.25;
  std::uint64_t texture_seed = 0;
};

struct SyntheticFrame {
  Tensor<float> left;                 // [3,H,W], quantized to k/255
  Tensor<float> right;                // [3,H,W]
  Tensor<float> depth;                // [1,H,W], left camera, metres
  Tensor<float> disparity;            // [1,H,W], left view
  Tensor<float> disparity_right;      // [1,H,W], right view
  Tensor<float> occluded;             // [1,H,W], 1 where the left pixel is hidden in the right view
  Pose pose;                          // left camera to world
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  SyntheticConfig config;
  CameraModel camera;
  std::vector<TexturedPlane> planes;  // background first
  std::vector<SyntheticFrame> frames;
};

/// Deterministic in (seed, cfg). Planes and track are drawn from the seed;
/// every image is ray cast, so stereo pairs and frames agree exactly with the
/// returned depth up to 8-bit quantization.
SyntheticScene generate_scene(std::uint64_t seed, const SyntheticConfig& cfg = {});

struct RayHit {
  int plane = -1;
  double depth = 0;  // camera-frame Z
};

/// Nearest plane hit by the ray through continuous pixel (u, v) of a camera
/// with identity rotation centred at `centre` (world coordinates).
RayHit cast_ray(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                const Eigen::Vector3d& centre, double u, double v);

/// Texture colour of a plane at world (X, Y).
Eigen::Vector3d plane_color(const TexturedPlane& plane, double x, double y);

/// Renders RGB (unquantized) and depth for a camera at `centre`.
void render_view(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                 const Eigen::Vector3d& centre, Index height, Index width, Tensor<float>& rgb,
                 Tensor<float>& depth);

/// For each pixel of the camera at `from`: 1 when its surface point is also
/// seen by the camera at `to` (inside the frame and unoccluded), else 0.
Tensor<float> visibility_mask(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                              const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                              Index height, Index width);

}  // namespace svs
