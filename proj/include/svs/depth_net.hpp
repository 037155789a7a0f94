#pragma once

// Unsupervised stereo disparity network: a residual 2D feature extractor,
// disparity-indexed feature volumes, a 3D convolutional encoder-decoder that
// turns each volume into per-hypothesis costs, and a soft-argmin regression.

#include "svs/geometry.hpp"
#include "svs/layers.hpp"

namespace svs {

/// Monotonically increasing disparity values in pixels, one per cost slice.
struct DisparityHypotheses {
  std::vector<double> values;

  /// count values evenly spaced over [d_min, d_max].
  static DisparityHypotheses linear(Index count, double d_min, double d_max);
  Index size() const { return static_cast<Index>(values.size()); }
  double min() const { return values.front(); }
  double max() const { return values.back(); }
  void validate() const;
};

struct DepthNetConfig {
  Index input_channels = 3;
  Index features = 32;
  int residual_blocks = 9;
  /// Cost slices at full resolution; the feature volume holds half as many.
  Index hypotheses = 16;
  double min_disparity = 0.0;
  double max_disparity = 16.0;
  Index kernel3d = 3;
  BlockOrder order = BlockOrder::kReluThenNorm;
  StereoConvention convention = StereoConvention::kRightCameraAtPositiveX;
  /// Eval mode normalizes each pair with its own statistics instead of the
  /// running averages.
  bool sample_stats_at_eval = true;

  void validate() const;
};

template <typename T>
struct StereoDisparities {
  Tensor<T> left;   // [1,H,W]
  Tensor<T> right;  // [1,H,W]
};

/// Shifts the last dim: out[..., x] = in[..., x - offset], zero-filled.
template <typename T>
Tensor<T> shift_columns(const Tensor<T>& x, Index offset);

/// P(i) = softmax_i(-cost(i)) per pixel, evaluated with the max-shift; the
/// result is sum_i disp(i) * P(i). cost is [D,H,W], the result [1,H,W].
template <typename T>
Tensor<T> soft_argmin(const Tensor<T>& cost, const DisparityHypotheses& hyps);

/// Per-pixel softmax probabilities [D,H,W] (not differentiable; diagnostics).
template <typename T>
Tensor<T> disparity_probabilities(const Tensor<T>& cost);

template <typename T>
class DepthNet {
 public:
  static constexpr const char* kModelName = "depthnet-v1";

  explicit DepthNet(DepthNetConfig config = {}, std::uint64_t seed = 0);

  /// image [C,H,W] -> features [1,F,H/2,W/2].
  Tensor<T> extract_features(const Tensor<T>& image);

  /// Concatenates the reference features with the other view's features
  /// shifted by each volume level: [1,2F,D/2,H/2,W/2].
  Tensor<T> build_feature_volume(const Tensor<T>& ref, const Tensor<T>& other,
                                 StereoSide side) const;

  /// Encoder-decoder filtering: [1,2F,L,h,w] -> costs [2L,2h,2w].
  Tensor<T> filter_volume(const Tensor<T>& volume);

  StereoDisparities<T> predict(const Tensor<T>& left, const Tensor<T>& right);

  const DepthNetConfig& config() const { return config_; }
  const DisparityHypotheses& hypotheses() const { return hypotheses_; }
  /// Column shift (feature pixels) applied at each feature-volume level.
  const std::vector<Index>& volume_shifts() const { return volume_shifts_; }

  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;
  /// Parameters followed by buffers; the checkpoint payload.
  NamedTensors<T> state() const;

  void set_mode(NormMode mode) {
    mode_ = mode == NormMode::kEval && config_.sample_stats_at_eval ? NormMode::kSampleStatistics : mode;
  }
  NormMode mode() const { return mode_; }

  /// Throws ShapeError unless a [C,H,W] image of this size can be processed.
  void check_input(const Tensor<T>& image) const;

 private:
  struct Layer3d {
    Conv<T> conv;
    BatchNorm<T> bn;
  };
  Tensor<T> apply(Layer3d& layer, const Tensor<T>& x);
  Tensor<T> apply(Layer3d& layer, const Tensor<T>& x, const std::vector<Index>& target);

  DepthNetConfig config_;
  DisparityHypotheses hypotheses_;
  std::vector<Index> volume_shifts_;
  NormMode mode_ = NormMode::kTraining;

  Conv<T> conv_0_;
  std::vector<ResidualBlock<T>> res_;
  Conv<T> conv_10_;
  std::vector<Layer3d> encoder_;  // conv3d_1 .. conv3d_8
  std::vector<Layer3d> decoder_;  // tr_conv3d_1 .. tr_conv3d_4
  Conv<T> output_;
};

}  // namespace svs
