#pragma once

// Uniform access to stereo sequences, generated or read from KITTI layout:
// stereo pairs for depth training and five-frame windows for view synthesis.

#include "svs/config.hpp"

#include <memory>

namespace svs {

class FrameSequence {
 public:
  virtual ~FrameSequence() = default;
  virtual std::string id() const = 0;
  virtual int size() const = 0;
  virtual const CameraModel& camera() const = 0;
  /// Camera-to-world pose of the left camera per frame.
  virtual const std::vector<Pose>& poses() const = 0;
  virtual Tensor<float> left(int frame) const = 0;
  virtual Tensor<float> right(int frame) const = 0;
  virtual bool has_depth() const = 0;
  virtual Tensor<float> depth(int frame) const = 0;
};

/// Generated scene held in memory.
class SyntheticSequence : public FrameSequence {
 public:
  explicit SyntheticSequence(SyntheticScene scene);

  std::string id() const override;
  int size() const override { return static_cast<int>(scene_.frames.size()); }
  const CameraModel& camera() const override { return scene_.camera; }
  const std::vector<Pose>& poses() const override { return poses_; }
  Tensor<float> left(int frame) const override;
  Tensor<float> right(int frame) const override;
  bool has_depth() const override { return true; }
  Tensor<float> depth(int frame) const override;
  const SyntheticScene& scene() const { return scene_; }

 private:
  const SyntheticFrame& at(int frame) const;
  SyntheticScene scene_;
  std::vector<Pose> poses_;
};

/// KITTI odometry sequence read lazily from disk.
class KittiFrames : public FrameSequence {
 public:
  explicit KittiFrames(KittiSequence seq) : seq_(std::move(seq)) {}

  std::string id() const override { return seq_.id(); }
  int size() const override { return seq_.size(); }
  const CameraModel& camera() const override { return seq_.camera(); }
  const std::vector<Pose>& poses() const override { return seq_.poses(); }
  Tensor<float> left(int frame) const override { return seq_.left(frame); }
  Tensor<float> right(int frame) const override { return seq_.right(frame); }
  bool has_depth() const override { return seq_.has_depth(); }
  Tensor<float> depth(int frame) const override { return seq_.depth(frame); }

 private:
  KittiSequence seq_;
};

struct StereoPair {
  Tensor<float> left;
  Tensor<float> right;
};

/// Target frame with its reference frames ordered nearest first.
struct ViewWindow {
  std::string label;
  CameraModel camera;
  Tensor<float> target;
  std::vector<int> offsets;
  std::vector<Tensor<float>> left;   // reference left images
  std::vector<Tensor<float>> right;  // reference right images
  std::vector<Tensor<float>> depth;  // reference depth; empty if unknown
  std::vector<Pose> to_target;       // reference camera -> target camera
};

struct WindowRef {
  std::size_t sequence = 0;
  int target = 0;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<std::shared_ptr<FrameSequence>> sequences);

  std::size_t sequence_count() const { return sequences_.size(); }
  const FrameSequence& sequence(std::size_t i) const { return *sequences_.at(i); }

  /// Every frame of every sequence, in order.
  Index pair_count() const;
  StereoPair pair(Index i) const;

  /// All windows whose references fit inside their sequence.
  std::vector<WindowRef> windows(int spacing) const;
  ViewWindow window(const WindowRef& ref, int spacing, bool with_depth) const;

 private:
  std::vector<std::shared_ptr<FrameSequence>> sequences_;
  std::vector<Index> pair_offsets_;
};

/// Generated scenes (seeds first_seed ..) or the listed KITTI sequences.
Dataset load_dataset(const DatasetSpec& spec);

/// Deterministic sample index in [0, count) for a (seed, iteration, slot).
Index sample_index(std::uint64_t seed, long long iteration, int slot, Index count);

}  // namespace svs
