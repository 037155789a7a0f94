#pragma once

// KITTI odometry layout:
//   <root>/sequences/NN/image_2/%06d.png   left colour camera
//   <root>/sequences/NN/image_3/%06d.png   right colour camera
//   <root>/sequences/NN/calib.txt          "P2: ..." and "P3: ..." (12 floats)
//   <root>/poses/NN.txt                    12 floats per frame, row-major 3x4
// plus, for generated data, <root>/sequences/NN/depth_2/%06d.png holding
// 16-bit depth (metres * 256) for the left camera.

#include "svs/geometry.hpp"

#include <filesystem>
#include <optional>

namespace svs {

/// Malformed or missing dataset files; messages carry path and line number.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StereoCalibration {
  Eigen::Matrix<double, 3, 4> p2 = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix<double, 3, 4> p3 = Eigen::Matrix<double, 3, 4>::Zero();

  /// Left-camera intrinsics with baseline (P2[0,3] - P3[0,3]) / fx.
  CameraModel camera() const;
  static StereoCalibration from_camera(const CameraModel& cam);
};

StereoCalibration parse_calibration(const std::filesystem::path& path);
std::vector<Pose> parse_poses(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const StereoCalibration& calib);
void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);

/// Central crop applied to every loaded frame; the principal point shifts
/// accordingly. Zero extents mean "no crop".
struct CropSpec {
  Index height = 0;
  Index width = 0;
};

class KittiSequence {
 public:
  KittiSequence(std::filesystem::path root, std::string sequence, CropSpec crop = {});

  const std::string& id() const { return sequence_; }
  int size() const { return static_cast<int>(poses_.size()); }
  const CameraModel& camera() const { return camera_; }
  const StereoCalibration& calibration() const { return calib_; }
  const std::vector<Pose>& poses() const { return poses_; }

  std::filesystem::path left_path(int frame) const;
  std::filesystem::path right_path(int frame) const;
  std::filesystem::path depth_path(int frame) const;

  Tensor<float> left(int frame) const;
  Tensor<float> right(int frame) const;
  bool has_depth() const;
  Tensor<float> depth(int frame) const;

 private:
  Tensor<float> crop(const Tensor<float>& image) const;
  void check_frame(int frame) const;

  std::filesystem::path root_;
  std::string sequence_;
  CropSpec crop_;
  StereoCalibration calib_;
  CameraModel camera_;
  std::vector<Pose> poses_;
  Index full_height_ = 0;
  Index full_width_ = 0;
};

KittiSequence load_kitti_sequence(const std::filesystem::path& root, const std::string& sequence,
                                  CropSpec crop = {});

/// Target frame plus references at offsets -2s, -s, +s, +2s. Spacing 0 is a
/// debugging mode where the target serves as its own (single) reference.
struct SequenceSample {
  int target = 0;
  int spacing = 1;
  std::vector<int> references;        // frame indices, nearest first
  std::vector<int> offsets;           // reference - target
  std::vector<Pose> reference_to_target;
};

SequenceSample sample_window(int sequence_length, const std::vector<Pose>& poses, int target,
                             int spacing);
SequenceSample sample_window(const KittiSequence& seq, int target, int spacing);

/// Window centres whose references all fall inside the sequence.
std::vector<int> eligible_targets(int sequence_length, int spacing);

/// Frames for export: images are [3,H,W] in [0,1]; depth is optional.
struct ExportFrame {
  Tensor<float> left;
  Tensor<float> right;
  Tensor<float> depth;
  Pose pose;
};

void write_kitti_sequence(const std::filesystem::path& root, const std::string& sequence,
                          const CameraModel& cam, const std::vector<ExportFrame>& frames);

}  // namespace svs
