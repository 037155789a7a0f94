#include "svs/inpaint_net.hpp"

#include <algorithm>
#include <numeric>

namespace svs {

void InpaintNetConfig::validate() const {
  if (views < 1) throw std::invalid_argument("inpaint net: need at least one view");
  if (width <= 0 || mid_width <= 0 || head_width <= 0) {
    throw std::invalid_argument("inpaint net: channel widths must be positive");
  }
  if (!(branch_init_scale >= 0) || !(output_init_scale >= 0)) {
    throw std::invalid_argument("inpaint net: init scales must be non-negative");
  }
}

Tensor<float> stack_views(const std::vector<WarpedView>& views) {
  if (views.empty()) throw std::invalid_argument("stack_views: no views");
  const Index h = views[0].rgb.dim(1), w = views[0].rgb.dim(2), plane = h * w;
  Tensor<float> out({4 * static_cast<Index>(views.size()), h, w});
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rgb.shape() != Shape{3, h, w}) {
      throw ShapeError("stack_views: view " + std::to_string(v) + " has shape " +
                       to_string(views[v].rgb.shape()) + ", expected " + to_string({3, h, w}));
    }
    const Index base = 4 * static_cast<Index>(v) * plane;
    out.values().segment(base, 3 * plane) = views[v].rgb.values();
    out.values().segment(base + 3 * plane, plane) = views[v].mask.values();
  }
  return out;
}

std::vector<std::size_t> view_order(const std::vector<int>& offsets) {
  std::vector<std::size_t> idx(offsets.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const int da = std::abs(offsets[a]), db = std::abs(offsets[b]);
    if (da != db) return da < db;
    return offsets[a] < offsets[b];
  });
  return idx;
}

MedianFusion median_fusion(const std::vector<WarpedView>& views) {
  if (views.empty()) throw std::invalid_argument("median_fusion: no views");
  const Index h = views[0].rgb.dim(1), w = views[0].rgb.dim(2), plane = h * w;
  MedianFusion out{Tensor<float>({3, h, w}), Tensor<float>({1, h, w})};
  std::vector<float> samples;
  for (Index p = 0; p < plane; ++p) {
    for (Index c = 0; c < 3; ++c) {
      samples.clear();
      for (const auto& v : views)
        if (v.mask[p] > 0.5f) samples.push_back(v.rgb[c * plane + p]);
      if (samples.empty()) {
        out.holes[p] = 1.0f;
        continue;
      }
      std::sort(samples.begin(), samples.end());
      const std::size_t n = samples.size();
      out.rgb[c * plane + p] =
          n % 2 ? samples[n / 2] : 0.5f * (samples[n / 2 - 1] + samples[n / 2]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
typename InpaintNet<T>::Stage InpaintNet<T>::make_stage(const std::string& name, Index channels,
                                                        std::mt19937_64& rng) const {
  Stage s;
  if (config_.block == InpaintBlockKind::kResidual) {
    s.residual.emplace(name, 2, channels, rng, config_.batch_norm, config_.order,
                       config_.branch_init_scale);
  } else {
    s.conv.emplace(name, ConvSpec::same(2, channels, channels, 3), rng, config_.batch_norm,
                   config_.order);
  }
  return s;
}

template <typename T>
InpaintNet<T>::InpaintNet(InpaintNetConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Index in = config_.input_channels(), w = config_.width, m = config_.mid_width;
  const bool bn = config_.batch_norm;
  conv_0_ = ConvActNorm<T>("conv_0", ConvSpec::same(2, in, w, 3), rng, bn, config_.order);
  res_1_ = make_stage("res_1", w, rng);
  // Block 1 concatenates pooled res_1 with the pooled raw input.
  if (w + in != m) {
    throw std::invalid_argument("inpaint net: width + 4*views must equal mid_width (" +
                                std::to_string(w) + " + " + std::to_string(in) +
                                " != " + std::to_string(m) + ")");
  }
  for (int i = 2; i <= 8; ++i) half_.push_back(make_stage("res_" + std::to_string(i), m, rng));
  conv_9_ = ConvActNorm<T>("conv_9", ConvSpec::same(2, m + w, m, 3), rng, bn, config_.order);
  res_10_ = make_stage("res_10", m, rng);
  res_11_ = make_stage("res_11", m, rng);
  conv_12_ = ConvActNorm<T>("conv_12", ConvSpec::same(2, m, config_.head_width, 3), rng, bn,
                            config_.order);
  output_ = Conv<T>("output", ConvSpec::same(2, config_.head_width, 3, 3), rng);
  output_.weight().values() *= static_cast<T>(config_.output_init_scale);
  output_.bias().values().setConstant(T(0.5));
}

template <typename T>
std::string InpaintNet<T>::model_name() const {
  return config_.block == InpaintBlockKind::kResidual ? "inpaintnet-v1" : "inpaintnet-conv-v1";
}

template <typename T>
Tensor<T> InpaintNet<T>::run(Stage& stage, const Tensor<T>& x) {
  return stage.residual ? (*stage.residual)(x, mode_) : (*stage.conv)(x, mode_);
}

template <typename T>
Tensor<T> InpaintNet<T>::forward(const Tensor<T>& input) {
  const Index in = config_.input_channels();
  if (input.rank() != 3 || input.dim(0) != in) {
    throw ShapeError("inpaint net: expected input [" + std::to_string(in) + ",H,W] (4 channels x " +
                     std::to_string(config_.views) + " views), got " + to_string(input.shape()));
  }
  const Index h = input.dim(1), w = input.dim(2);
  if (h % 2 || w % 2) {
    throw ShapeError("inpaint net: extents must be even, got " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  auto x = input.reshape({1, in, h, w});
  auto r1 = run(res_1_, conv_0_(x, mode_));
  auto y = concat<T>({avg_pool2x(r1), avg_pool2x(x)}, 1);
  for (auto& s : half_) y = run(s, y);
  auto z = conv_9_(concat<T>({upsample2x(y), r1}, 1), mode_);
  z = run(res_11_, run(res_10_, z));
  auto out = output_(conv_12_(z, mode_)).reshape({3, h, w});
  return config_.output == OutputActivation::kSigmoid ? sigmoid(out) : clamp(out, T(0), T(1));
}

template <typename T>
void InpaintNet<T>::collect(const Stage& stage, NamedTensors<T>& params,
                            NamedTensors<T>* buffers) const {
  if (stage.residual) {
    if (buffers) stage.residual->collect_buffers(*buffers);
    else stage.residual->collect_parameters(params);
  } else {
    if (buffers) stage.conv->collect_buffers(*buffers);
    else stage.conv->collect_parameters(params);
  }
}

template <typename T>
NamedTensors<T> InpaintNet<T>::parameters() const {
  NamedTensors<T> out;
  conv_0_.collect_parameters(out);
  collect(res_1_, out, nullptr);
  for (const auto& s : half_) collect(s, out, nullptr);
  conv_9_.collect_parameters(out);
  collect(res_10_, out, nullptr);
  collect(res_11_, out, nullptr);
  conv_12_.collect_parameters(out);
  output_.collect_parameters(out);
  return out;
}

template <typename T>
NamedTensors<T> InpaintNet<T>::buffers() const {
  NamedTensors<T> out;
  conv_0_.collect_buffers(out);
  collect(res_1_, out, &out);
  for (const auto& s : half_) collect(s, out, &out);
  conv_9_.collect_buffers(out);
  collect(res_10_, out, &out);
  collect(res_11_, out, &out);
  conv_12_.collect_buffers(out);
  return out;
}

template <typename T>
NamedTensors<T> InpaintNet<T>::state() const {
  auto out = parameters();
  auto b = buffers();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template class InpaintNet<float>;
template class InpaintNet<double>;

}  // namespace svs
