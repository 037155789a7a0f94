#include "svs/layers.hpp"

#include <cmath>

namespace svs {

template <typename T>
Conv<T>::Conv(std::string name, ConvSpec spec, std::mt19937_64& rng, bool transposed,
              double init_scale)
    : name_(std::move(name)), spec_(std::move(spec)), transposed_(transposed) {
  spec_.validate();
  Shape wshape = spec_.weight_shape();
  if (transposed_) std::swap(wshape[0], wshape[1]);
  Index fan_in = spec_.in_channels;
  for (Index k : spec_.kernel) fan_in *= k;
  const double bound = init_scale * std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  typename Tensor<T>::Array w(numel(wshape));
  for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<T>(dist(rng));
  weight_ = Tensor<T>(wshape, std::move(w));
  weight_.requires_grad_();
  bias_ = Tensor<T>::zeros({spec_.out_channels});
  bias_.requires_grad_();
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x) const {
  if (transposed_) throw ShapeError(name_ + ": transposed layer needs target extents");
  return spec_.spatial_dims() == 2 ? conv2d(x, weight_, bias_, spec_) : conv3d(x, weight_, bias_, spec_);
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x, const std::vector<Index>& output_spatial) const {
  if (!transposed_) throw ShapeError(name_ + ": not a transposed layer");
  return conv_transpose3d(x, weight_, bias_, spec_, output_spatial);
}

template <typename T>
void Conv<T>::collect_parameters(NamedTensors<T>& out) const {
  out.push_back({name_ + ".weight", weight_});
  out.push_back({name_ + ".bias", bias_});
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, Index channels)
    : name_(std::move(name)),
      gamma_(Tensor<T>::ones({channels})),
      beta_(Tensor<T>::zeros({channels})),
      stats_(channels) {
  gamma_.requires_grad_();
  beta_.requires_grad_();
}

template <typename T>
Tensor<T> BatchNorm<T>::operator()(const Tensor<T>& x, NormMode mode) {
  return batch_norm(x, gamma_, beta_, &stats_, mode);
}

template <typename T>
void BatchNorm<T>::collect_parameters(NamedTensors<T>& out) const {
  out.push_back({name_ + ".gamma", gamma_});
  out.push_back({name_ + ".beta", beta_});
}

template <typename T>
void BatchNorm<T>::collect_buffers(NamedTensors<T>& out) const {
  out.push_back({name_ + ".running_mean", stats_.mean});
  out.push_back({name_ + ".running_var", stats_.var});
}

// ---------------------------------------------------------------------------

template <typename T>
ConvActNorm<T>::ConvActNorm(std::string name, ConvSpec spec, std::mt19937_64& rng, bool norm,
                            BlockOrder order)
    : conv_(name, spec, rng), order_(order) {
  if (norm) norm_.emplace(name + ".bn", spec.out_channels);
}

template <typename T>
Tensor<T> ConvActNorm<T>::operator()(const Tensor<T>& x, NormMode mode) {
  auto z = conv_(x);
  if (!norm_) return relu(z);
  return order_ == BlockOrder::kReluThenNorm ? (*norm_)(relu(z), mode) : relu((*norm_)(z, mode));
}

template <typename T>
void ConvActNorm<T>::collect_parameters(NamedTensors<T>& out) const {
  conv_.collect_parameters(out);
  if (norm_) norm_->collect_parameters(out);
}

template <typename T>
void ConvActNorm<T>::collect_buffers(NamedTensors<T>& out) const {
  if (norm_) norm_->collect_buffers(out);
}

// ---------------------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, int spatial_dims, Index channels,
                                std::mt19937_64& rng, bool norm, BlockOrder order,
                                double branch_init_scale)
    : conv_a_(name + ".conv_a", ConvSpec::same(spatial_dims, channels, channels, 3), rng),
      conv_b_(name + ".conv_b", ConvSpec::same(spatial_dims, channels, channels, 3), rng, false,
              branch_init_scale),
      order_(order) {
  if (norm) {
    bn_a_.emplace(name + ".bn_a", channels);
    bn_b_.emplace(name + ".bn_b", channels);
  }
}

template <typename T>
Tensor<T> ResidualBlock<T>::activate(const Tensor<T>& z, std::optional<BatchNorm<T>>& bn,
                                     NormMode mode) {
  if (!bn) return relu(z);
  return order_ == BlockOrder::kReluThenNorm ? (*bn)(relu(z), mode) : relu((*bn)(z, mode));
}

template <typename T>
Tensor<T> ResidualBlock<T>::operator()(const Tensor<T>& x, NormMode mode) {
  auto h = activate(conv_a_(x), bn_a_, mode);
  return activate(conv_b_(h) + x, bn_b_, mode);
}

template <typename T>
void ResidualBlock<T>::collect_parameters(NamedTensors<T>& out) const {
  conv_a_.collect_parameters(out);
  if (bn_a_) bn_a_->collect_parameters(out);
  conv_b_.collect_parameters(out);
  if (bn_b_) bn_b_->collect_parameters(out);
}

template <typename T>
void ResidualBlock<T>::collect_buffers(NamedTensors<T>& out) const {
  if (bn_a_) bn_a_->collect_buffers(out);
  if (bn_b_) bn_b_->collect_buffers(out);
}

template class Conv<float>;
template class Conv<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class ConvActNorm<float>;
template class ConvActNorm<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;

}  // namespace svs
