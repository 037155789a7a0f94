#pragma once

// Non-learned geometry: pinhole stereo camera, disparity/depth conversion,
// differentiable bilinear backward warping and z-buffered forward mapping.
//
// Pixel convention: the homogeneous pixel vector is [x, y, 1] = [column, row,
// 1], with integer coordinates at pixel centres. A continuous image position u
// therefore falls in pixel floor(u + 0.5).

#include "svs/tensor.hpp"

#include <Eigen/Geometry>

namespace svs {

struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 1.0;  // metres

  /// Throws std::invalid_argument unless fx, fy and baseline are positive.
  void validate() const;
  Eigen::Matrix3d intrinsics() const;
};

/// Rigid transform taking points from a source camera frame into a target
/// camera frame: X_target = R * X_source + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Eigen::Matrix<double, 3, 4>& m);
  Eigen::Matrix<double, 3, 4> matrix() const;

  Pose inverse() const;
  /// (a * b) applies b first.
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  /// Throws std::invalid_argument unless R is orthonormal with det +1.
  void validate(double tol = 1e-6) const;
};

struct DepthConversion {
  Tensor<float> depth;
  Index clamped = 0;  // pixels whose disparity was raised to the floor
};

/// Z = fx * B / d per pixel, with d clamped below at `min_disparity` (> 0).
DepthConversion disparity_to_depth(const Tensor<float>& disparity, const CameraModel& cam,
                                   double min_disparity);

/// Samples img [C,H,W] at absolute source coordinates grid [2,H',W'] (x then
/// y) with bilinear interpolation. Coordinates outside the image clamp to the
/// border. Differentiable with respect to both img and grid.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& img, const Tensor<T>& grid);

/// 1 where the grid coordinate lies inside the image (no clamping), else 0.
template <typename T>
Tensor<T> in_bounds_mask(const Tensor<T>& grid, Index height, Index width);

enum class StereoSide { kLeft, kRight };

/// Sign convention for horizontal stereo warps. The default describes a
/// rectified pair whose right camera sits at +x: the left view is rebuilt by
/// sampling the right image at x - d, the right view by sampling the left
/// image at x + d.
enum class StereoConvention { kRightCameraAtPositiveX, kRightCameraAtNegativeX };

/// Source-coordinate grid [2,H,W] for reconstructing `side` from the other view.
template <typename T>
Tensor<T> stereo_grid(const Tensor<T>& disparity, StereoSide side,
                      StereoConvention convention = StereoConvention::kRightCameraAtPositiveX);

/// Reconstructs the `side` view by bilinearly sampling the other view along
/// rows, displaced by the per-pixel disparity [1,H,W].
template <typename T>
Tensor<T> warp_stereo(const Tensor<T>& other, const Tensor<T>& disparity, StereoSide side,
                      StereoConvention convention = StereoConvention::kRightCameraAtPositiveX);

/// Forward-mapped view: colours plus a binary mask of pixels that received a
/// source sample. rgb is zero wherever mask is zero.
struct WarpedView {
  Tensor<float> rgb;   // [C,H,W]
  Tensor<float> mask;  // [1,H,W]
  Index dropped_behind = 0;
  Index dropped_outside = 0;

  double coverage() const { return mask.values().mean(); }
};

/// Projects every source pixel with its depth into the target camera, rounds
/// to the target pixel, and resolves collisions by keeping the sample with
/// the smallest target depth; among exactly equal depths the sample landing
/// nearest the pixel centre wins. Pixels behind the camera or outside the
/// frame are dropped and counted.
WarpedView forward_map(const Tensor<float>& src, const Tensor<float>& depth,
                       const CameraModel& cam, const Pose& source_to_target);

std::vector<WarpedView> warp_reference_set(const std::vector<Tensor<float>>& views,
                                           const std::vector<Tensor<float>>& depths,
                                           const std::vector<CameraModel>& cams,
                                           const std::vector<Pose>& poses);

}  // namespace svs
