#include "svs/depth_net.hpp"

#include <cmath>

namespace svs {

DisparityHypotheses DisparityHypotheses::linear(Index count, double d_min, double d_max) {
  if (count < 2) throw std::invalid_argument("need at least two disparity hypotheses");
  if (!(d_max > d_min)) throw std::invalid_argument("disparity range must be increasing");
  DisparityHypotheses h;
  const double step = (d_max - d_min) / static_cast<double>(count - 1);
  for (Index i = 0; i < count; ++i) h.values.push_back(d_min + step * static_cast<double>(i));
  h.values.back() = d_max;
  return h;
}

void DisparityHypotheses::validate() const {
  if (values.size() < 2) throw std::invalid_argument("need at least two disparity hypotheses");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) {
      throw std::invalid_argument("disparity hypotheses must be strictly increasing");
    }
  }
}

void DepthNetConfig::validate() const {
  if (input_channels <= 0 || features <= 0 || residual_blocks < 0) {
    throw std::invalid_argument("depth net: channel counts must be positive");
  }
  if (hypotheses < 2 || hypotheses % 2) {
    throw std::invalid_argument("depth net: hypotheses must be even and >= 2, got " +
                                std::to_string(hypotheses));
  }
  if (kernel3d % 2 == 0) throw std::invalid_argument("depth net: 3D kernel must be odd");
  if (!(min_disparity >= 0.0 && max_disparity > min_disparity)) {
    throw std::invalid_argument("depth net: need 0 <= min_disparity < max_disparity");
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> shift_columns(const Tensor<T>& x, Index offset) {
  const Index w = x.dim(-1), rows = x.numel() / w;
  typename Tensor<T>::Array out = Tensor<T>::Array::Zero(x.numel());
  const Index lo = std::max<Index>(0, offset), hi = std::min<Index>(w, w + offset);
  const T* src = x.data();
  for (Index r = 0; r < rows; ++r)
    for (Index c = lo; c < hi; ++c) out[r * w + c] = src[r * w + c - offset];
  return Tensor<T>::make_result(x.shape(), std::move(out), {x},
                                [x, rows, w, lo, hi, offset](const auto& g) {
                                  auto* s = x.grad_sink();
                                  if (!s) return;
                                  for (Index r = 0; r < rows; ++r)
                                    for (Index c = lo; c < hi; ++c)
                                      (*s)[r * w + c - offset] += g[r * w + c];
                                });
}

template <typename T>
Tensor<T> disparity_probabilities(const Tensor<T>& cost) {
  if (cost.rank() != 3) throw ShapeError("cost volume must be [D,H,W], got " + to_string(cost.shape()));
  const Index d = cost.dim(0), npix = cost.dim(1) * cost.dim(2);
  Tensor<T> p(cost.shape());
  const T* c = cost.data();
  for (Index q = 0; q < npix; ++q) {
    T lowest = c[q];
    for (Index i = 1; i < d; ++i) lowest = std::min(lowest, c[i * npix + q]);
    T z = 0;
    for (Index i = 0; i < d; ++i) {
      const T e = std::exp(lowest - c[i * npix + q]);
      p[i * npix + q] = e;
      z += e;
    }
    for (Index i = 0; i < d; ++i) p[i * npix + q] /= z;
  }
  return p;
}

template <typename T>
Tensor<T> soft_argmin(const Tensor<T>& cost, const DisparityHypotheses& hyps) {
  if (cost.rank() != 3 || cost.dim(0) != hyps.size()) {
    throw ShapeError("soft_argmin: cost " + to_string(cost.shape()) + " does not match " +
                     std::to_string(hyps.size()) + " hypotheses");
  }
  const Index d = cost.dim(0), h = cost.dim(1), w = cost.dim(2), npix = h * w;
  Tensor<T> prob = disparity_probabilities(cost.detach());
  typename Tensor<T>::Array out = Tensor<T>::Array::Zero(npix);
  for (Index i = 0; i < d; ++i) {
    out += static_cast<T>(hyps.values[i]) * prob.values().segment(i * npix, npix);
  }
  typename Tensor<T>::Array expected = out;
  std::vector<T> disp(hyps.values.begin(), hyps.values.end());
  return Tensor<T>::make_result(
      Shape{1, h, w}, std::move(out), {cost}, [cost, prob, expected, disp, d, npix](const auto& g) {
        auto* s = cost.grad_sink();
        if (!s) return;
        for (Index i = 0; i < d; ++i) {
          s->segment(i * npix, npix) -=
              g * prob.values().segment(i * npix, npix) * (disp[i] - expected);
        }
      });
}

// ---------------------------------------------------------------------------

template <typename T>
DepthNet<T>::DepthNet(DepthNetConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  hypotheses_ = DisparityHypotheses::linear(config_.hypotheses, config_.min_disparity,
                                            config_.max_disparity);
  // Level j of the half-resolution volume stands for hypothesis 2j; its
  // shift is that disparity halved and rounded to whole feature pixels.
  for (Index j = 0; j < config_.hypotheses / 2; ++j) {
    volume_shifts_.push_back(static_cast<Index>(std::lround(hypotheses_.values[2 * j] / 2.0)));
  }

  std::mt19937_64 rng(seed);
  const Index f = config_.features;
  conv_0_ = Conv<T>("conv_0", ConvSpec::same(2, config_.input_channels, f, 5, 2), rng);
  for (int i = 0; i < config_.residual_blocks; ++i) {
    res_.emplace_back("res_" + std::to_string(i + 1), 2, f, rng, true, config_.order);
  }
  conv_10_ = Conv<T>("conv_" + std::to_string(config_.residual_blocks + 1),
                     ConvSpec::same(2, f, f, 3), rng);

  const Index k = config_.kernel3d;
  const Index strides[8] = {1, 1, 2, 1, 1, 2, 1, 2};
  for (int i = 0; i < 8; ++i) {
    const std::string name = "conv3d_" + std::to_string(i + 1);
    const Index in = i == 0 ? 2 * f : f;
    encoder_.push_back({Conv<T>(name, ConvSpec::same(3, in, f, k, strides[i]), rng),
                        BatchNorm<T>(name + ".bn", f)});
  }
  for (int i = 0; i < 4; ++i) {
    const std::string name = "tr_conv3d_" + std::to_string(i + 1);
    const Index in = i == 0 ? f : 2 * f;
    decoder_.push_back({Conv<T>(name, ConvSpec::same(3, in, f, k, 2), rng, true),
                        BatchNorm<T>(name + ".bn", f)});
  }
  output_ = Conv<T>("output", ConvSpec::same(3, f, 1, k), rng);
}

template <typename T>
void DepthNet<T>::check_input(const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(0) != config_.input_channels) {
    throw ShapeError("depth net: expected image [" + std::to_string(config_.input_channels) +
                     ",H,W], got " + to_string(image.shape()));
  }
  const Index h = image.dim(1), w = image.dim(2);
  if (h % 2 || w % 2) {
    throw ShapeError("depth net: image extents must be even, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  if ((h / 2) % 8 || (w / 2) % 8) {
    throw ShapeError("depth net: half-resolution extents must be divisible by 8 (H and W "
                     "divisible by 16), got " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
}

template <typename T>
Tensor<T> DepthNet<T>::apply(Layer3d& layer, const Tensor<T>& x) {
  auto z = layer.conv(x);
  return config_.order == BlockOrder::kReluThenNorm ? layer.bn(relu(z), mode_)
                                                    : relu(layer.bn(z, mode_));
}

template <typename T>
Tensor<T> DepthNet<T>::apply(Layer3d& layer, const Tensor<T>& x, const std::vector<Index>& target) {
  auto z = layer.conv(x, target);
  return config_.order == BlockOrder::kReluThenNorm ? layer.bn(relu(z), mode_)
                                                    : relu(layer.bn(z, mode_));
}

template <typename T>
Tensor<T> DepthNet<T>::extract_features(const Tensor<T>& image) {
  check_input(image);
  auto x = relu(conv_0_(image.reshape({1, image.dim(0), image.dim(1), image.dim(2)})));
  for (auto& block : res_) x = block(x, mode_);
  return conv_10_(x);
}

template <typename T>
Tensor<T> DepthNet<T>::build_feature_volume(const Tensor<T>& ref, const Tensor<T>& other,
                                            StereoSide side) const {
  if (ref.shape() != other.shape() || ref.rank() != 4 || ref.dim(0) != 1) {
    throw ShapeError("feature volume: need equal [1,F,h,w] features, got " +
                     to_string(ref.shape()) + " and " + to_string(other.shape()));
  }
  const Index f = ref.dim(1), h = ref.dim(2), w = ref.dim(3);
  // Left: other = right features moved by +shift (x - d). Right: the opposite.
  Index sign = side == StereoSide::kLeft ? 1 : -1;
  if (config_.convention == StereoConvention::kRightCameraAtNegativeX) sign = -sign;
  TensorList<T> slices;
  for (Index shift : volume_shifts_) {
    auto pair = concat<T>({ref, shift_columns(other, sign * shift)}, 1);
    slices.push_back(pair.reshape({1, 2 * f, 1, h, w}));
  }
  return concat(slices, 2);
}

template <typename T>
Tensor<T> DepthNet<T>::filter_volume(const Tensor<T>& volume) {
  if (volume.rank() != 5 || volume.dim(1) != 2 * config_.features) {
    throw ShapeError("filter_volume: expected [1," + std::to_string(2 * config_.features) +
                     ",L,h,w], got " + to_string(volume.shape()));
  }
  if (volume.dim(3) % 8 || volume.dim(4) % 8) {
    throw ShapeError("filter_volume: spatial extents must be divisible by 8, got " +
                     to_string(volume.shape()));
  }
  auto spatial = [](const Tensor<T>& t) {
    return std::vector<Index>(t.shape().begin() + 2, t.shape().end());
  };
  auto c1 = apply(encoder_[0], volume);
  auto c2 = apply(encoder_[1], c1);
  auto c3 = apply(encoder_[2], c2);
  auto c4 = apply(encoder_[3], c3);
  auto c5 = apply(encoder_[4], c4);
  auto c6 = apply(encoder_[5], c5);
  auto c7 = apply(encoder_[6], c6);
  auto c8 = apply(encoder_[7], c7);

  auto t1 = apply(decoder_[0], c8, spatial(c7));
  auto t2 = apply(decoder_[1], concat<T>({c7, t1}, 1), spatial(c5));
  auto t3 = apply(decoder_[2], concat<T>({c5, t2}, 1), spatial(c2));
  const std::vector<Index> full{2 * volume.dim(2), 2 * volume.dim(3), 2 * volume.dim(4)};
  auto t4 = apply(decoder_[3], concat<T>({c2, t3}, 1), full);
  auto cost = output_(t4);
  return cost.reshape({full[0], full[1], full[2]});
}

template <typename T>
StereoDisparities<T> DepthNet<T>::predict(const Tensor<T>& left, const Tensor<T>& right) {
  if (left.shape() != right.shape()) {
    throw ShapeError("predict: stereo images differ in shape: " + to_string(left.shape()) +
                     " vs " + to_string(right.shape()));
  }
  check_input(left);
  auto fl = extract_features(left);
  auto fr = extract_features(right);
  auto cost_l = filter_volume(build_feature_volume(fl, fr, StereoSide::kLeft));
  auto cost_r = filter_volume(build_feature_volume(fr, fl, StereoSide::kRight));
  return {soft_argmin(cost_l, hypotheses_), soft_argmin(cost_r, hypotheses_)};
}

template <typename T>
NamedTensors<T> DepthNet<T>::parameters() const {
  NamedTensors<T> out;
  conv_0_.collect_parameters(out);
  for (const auto& b : res_) b.collect_parameters(out);
  conv_10_.collect_parameters(out);
  for (const auto& l : encoder_) {
    l.conv.collect_parameters(out);
    l.bn.collect_parameters(out);
  }
  for (const auto& l : decoder_) {
    l.conv.collect_parameters(out);
    l.bn.collect_parameters(out);
  }
  output_.collect_parameters(out);
  return out;
}

template <typename T>
NamedTensors<T> DepthNet<T>::buffers() const {
  NamedTensors<T> out;
  for (const auto& b : res_) b.collect_buffers(out);
  for (const auto& l : encoder_) l.bn.collect_buffers(out);
  for (const auto& l : decoder_) l.bn.collect_buffers(out);
  return out;
}

template <typename T>
NamedTensors<T> DepthNet<T>::state() const {
  auto out = parameters();
  auto b = buffers();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template class DepthNet<float>;
template class DepthNet<double>;
template Tensor<float> shift_columns(const Tensor<float>&, Index);
template Tensor<double> shift_columns(const Tensor<double>&, Index);
template Tensor<float> soft_argmin(const Tensor<float>&, const DisparityHypotheses&);
template Tensor<double> soft_argmin(const Tensor<double>&, const DisparityHypotheses&);
template Tensor<float> disparity_probabilities(const Tensor<float>&);
template Tensor<double> disparity_probabilities(const Tensor<double>&);

}  // namespace svs
