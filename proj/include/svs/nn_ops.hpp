#pragma once

// Differentiable neural-network primitives: 2D/3D convolution, 3D transposed
// convolution, batch normalization, pooling/upsampling and box filtering.
// Layouts are channel-first: [N, C, H, W] for 2D and [N, C, D, H, W] for 3D.

#include "svs/tensor.hpp"

#include <optional>

namespace svs {

/// Kernel geometry of one convolution layer. Spatial vectors have one entry
/// per spatial dimension (2 or 3).
struct ConvSpec {
  std::vector<Index> kernel;
  std::vector<Index> stride;
  std::vector<Index> padding;
  Index in_channels = 0;
  Index out_channels = 0;

  /// Square/cubic kernel with "same"-style padding (kernel / 2).
  static ConvSpec same(int spatial_dims, Index in, Index out, Index kernel, Index stride = 1);

  int spatial_dims() const { return static_cast<int>(kernel.size()); }
  /// floor((in + 2 pad - kernel) / stride) + 1.
  Index output_extent(int d, Index in) const;
  Shape weight_shape() const;
  Index weight_count() const { return numel(weight_shape()); }
  void validate() const;
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec);

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec);

/// Adjoint of conv3d. Weights are laid out [in_channels, out_channels, k...],
/// i.e. as the weights of the forward convolution mapping output -> input.
/// `output_spatial` selects among the extents that the forward convolution
/// would map onto the input's extents.
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, const ConvSpec& spec,
                           const std::vector<Index>& output_spatial);

/// kSampleStatistics normalizes with the input's own statistics like
/// training but leaves the running statistics untouched.
enum class NormMode { kTraining, kEval, kSampleStatistics };

/// Per-channel running statistics updated in training mode.
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
  explicit RunningStats(Index channels)
      : mean(Tensor<T>::zeros({channels})), var(Tensor<T>::ones({channels})) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Normalizes each channel over all non-channel dimensions (training, sample
/// statistics) or with the running statistics (eval). With a batch of one this is instance
/// normalization.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>* stats, NormMode mode, T eps = T(kBatchNormEps),
                     T momentum = T(kBatchNormMomentum));

/// 2x2 average pooling with stride 2 over the last two dims.
template <typename T>
Tensor<T> avg_pool2x(const Tensor<T>& input);

/// Nearest-neighbour x2 upsampling over the last two dims.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& input);

/// Uniform window mean over the last two dims, valid positions only:
/// [..., H, W] -> [..., H - k + 1, W - k + 1].
template <typename T>
Tensor<T> box_filter(const Tensor<T>& input, Index window);

}  // namespace svs
