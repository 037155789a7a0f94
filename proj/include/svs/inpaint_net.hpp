#pragma once

// Texture inpainting: a two-scale residual network mapping forward-warped
// reference views (RGB + validity mask per view) to the rendered target view,
// its plain-convolution variant, and the per-pixel median baseline.

#include "svs/geometry.hpp"
#include "svs/layers.hpp"

namespace svs {

enum class InpaintBlockKind { kResidual, kConv };
enum class OutputActivation { kClampLinear, kSigmoid };

struct InpaintNetConfig {
  int views = 4;
  Index width = 32;      // full-resolution block
  Index mid_width = 48;  // half-resolution and decoder blocks
  Index head_width = 16;
  InpaintBlockKind block = InpaintBlockKind::kResidual;
  bool batch_norm = false;
  BlockOrder order = BlockOrder::kReluThenNorm;
  OutputActivation output = OutputActivation::kClampLinear;
  /// Initial weight scale of the second convolution in each residual branch.
  double branch_init_scale = 0.1;
  /// Initial weight scale of the output convolution, whose bias starts at
  /// mid-grey so the clamped output begins unsaturated.
  double output_init_scale = 0.1;

  Index input_channels() const { return 4 * static_cast<Index>(views); }
  void validate() const;
};

/// Stacks warped views into the [4V,H,W] network input (rgb then mask, per
/// view, in the given order).
Tensor<float> stack_views(const std::vector<WarpedView>& views);

/// Sorts reference frame offsets by |offset|, earlier frame first on ties.
/// Returns the permutation as indices into `offsets`.
std::vector<std::size_t> view_order(const std::vector<int>& offsets);

struct MedianFusion {
  Tensor<float> rgb;    // [3,H,W]
  Tensor<float> holes;  // [1,H,W], 1 where no view was valid
};

/// Per-pixel, per-channel median over the views valid at that pixel; an even
/// count averages the two middle values. Pixels no view covers become 0.
MedianFusion median_fusion(const std::vector<WarpedView>& views);

template <typename T>
class InpaintNet {
 public:
  explicit InpaintNet(InpaintNetConfig config = {}, std::uint64_t seed = 0);

  /// [4V,H,W] -> [3,H,W] in [0,1].
  Tensor<T> forward(const Tensor<T>& input);

  const InpaintNetConfig& config() const { return config_; }
  std::string model_name() const;

  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;
  NamedTensors<T> state() const;

  void set_mode(NormMode mode) { mode_ = mode; }
  NormMode mode() const { return mode_; }

 private:
  struct Stage {
    std::optional<ResidualBlock<T>> residual;
    std::optional<ConvActNorm<T>> conv;
  };
  Stage make_stage(const std::string& name, Index channels, std::mt19937_64& rng) const;
  Tensor<T> run(Stage& stage, const Tensor<T>& x);
  void collect(const Stage& stage, NamedTensors<T>& params, NamedTensors<T>* buffers) const;

  InpaintNetConfig config_;
  NormMode mode_ = NormMode::kTraining;

  ConvActNorm<T> conv_0_;
  Stage res_1_;
  std::vector<Stage> half_;  // res_2 .. res_8
  ConvActNorm<T> conv_9_;
  Stage res_10_;
  Stage res_11_;
  ConvActNorm<T> conv_12_;
  Conv<T> output_;
};

}  // namespace svs
