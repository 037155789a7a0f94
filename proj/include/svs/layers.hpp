#pragma once

// Parameterized building blocks shared by the depth and inpainting networks.

#include "svs/nn_ops.hpp"

#include <optional>
#include <random>
#include <string>

namespace svs {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using NamedTensors = std::vector<NamedTensor<T>>;

/// Total element count over a parameter list.
template <typename T>
Index parameter_count(const NamedTensors<T>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

/// Order of activation and normalization after a convolution.
enum class BlockOrder { kReluThenNorm, kNormThenRelu };

/// Convolution layer (2D or 3D, optionally transposed) with its parameters.
/// Weights use Kaiming-uniform fan-in initialization; biases start at zero.
template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(std::string name, ConvSpec spec, std::mt19937_64& rng, bool transposed = false,
       double init_scale = 1.0);

  Tensor<T> operator()(const Tensor<T>& x) const;
  /// Transposed layers only: upsample onto the given spatial extents.
  Tensor<T> operator()(const Tensor<T>& x, const std::vector<Index>& output_spatial) const;

  const std::string& name() const { return name_; }
  const ConvSpec& spec() const { return spec_; }
  bool transposed() const { return transposed_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  const Tensor<T>& weight() const { return weight_; }
  const Tensor<T>& bias() const { return bias_; }

  void collect_parameters(NamedTensors<T>& out) const;

 private:
  std::string name_;
  ConvSpec spec_;
  bool transposed_ = false;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, Index channels);

  Tensor<T> operator()(const Tensor<T>& x, NormMode mode);

  void collect_parameters(NamedTensors<T>& out) const;
  void collect_buffers(NamedTensors<T>& out) const;

 private:
  std::string name_;
  Tensor<T> gamma_;
  Tensor<T> beta_;
  RunningStats<T> stats_{1};
};

/// conv -> ReLU (+ norm) with the configured order; norm is optional.
template <typename T>
class ConvActNorm {
 public:
  ConvActNorm() = default;
  ConvActNorm(std::string name, ConvSpec spec, std::mt19937_64& rng, bool norm, BlockOrder order);

  Tensor<T> operator()(const Tensor<T>& x, NormMode mode);
  void collect_parameters(NamedTensors<T>& out) const;
  void collect_buffers(NamedTensors<T>& out) const;

 private:
  Conv<T> conv_;
  std::optional<BatchNorm<T>> norm_;
  BlockOrder order_ = BlockOrder::kReluThenNorm;
};

/// Two equal-width 3x3 stride-1 convolutions with an identity skip:
///   h = act(conv_a(x)); y = act(conv_b(h) + x)
/// where act is ReLU, followed or preceded by batch norm when enabled.
/// Output shape always equals input shape.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::string name, int spatial_dims, Index channels, std::mt19937_64& rng,
                bool norm, BlockOrder order, double branch_init_scale = 1.0);

  Tensor<T> operator()(const Tensor<T>& x, NormMode mode);
  void collect_parameters(NamedTensors<T>& out) const;
  void collect_buffers(NamedTensors<T>& out) const;

 private:
  Tensor<T> activate(const Tensor<T>& z, std::optional<BatchNorm<T>>& bn, NormMode mode);

  Conv<T> conv_a_;
  Conv<T> conv_b_;
  std::optional<BatchNorm<T>> bn_a_;
  std::optional<BatchNorm<T>> bn_b_;
  BlockOrder order_ = BlockOrder::kReluThenNorm;
};

}  // namespace svs
