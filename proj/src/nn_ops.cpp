#include "svs/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace svs {

ConvSpec ConvSpec::same(int spatial_dims, Index in, Index out, Index kernel, Index stride) {
  ConvSpec s;
  s.kernel.assign(spatial_dims, kernel);
  s.stride.assign(spatial_dims, stride);
  s.padding.assign(spatial_dims, kernel / 2);
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

Index ConvSpec::output_extent(int d, Index in) const {
  const Index span = in + 2 * padding[d] - kernel[d];
  if (span < 0) return 0;
  return span / stride[d] + 1;
}

Shape ConvSpec::weight_shape() const {
  Shape s{out_channels, in_channels};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

void ConvSpec::validate() const {
  const auto n = kernel.size();
  if (n < 1 || n > 3 || stride.size() != n || padding.size() != n) {
    throw ShapeError("ConvSpec: kernel/stride/padding must have 1-3 equal-length entries");
  }
  if (in_channels <= 0 || out_channels <= 0) throw ShapeError("ConvSpec: channels must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (kernel[i] <= 0 || stride[i] <= 0 || padding[i] < 0) {
      throw ShapeError("ConvSpec: kernel/stride must be positive and padding non-negative");
    }
  }
}

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Conv geometry normalized to three spatial dims (2D convs use depth 1).
struct ConvGeom {
  Index batch = 1, cin = 0, cout = 0;
  Index d = 1, h = 1, w = 1;     // input extents
  Index od = 1, oh = 1, ow = 1;  // output extents
  Index kd = 1, kh = 1, kw = 1;
  Index sd = 1, sh = 1, sw = 1;
  Index pd = 0, ph = 0, pw = 0;

  Index k() const { return cin * kd * kh * kw; }
  Index in_plane() const { return h * w; }
  Index out_plane() const { return oh * ow; }
  Index in_volume() const { return d * h * w; }
  Index out_volume() const { return od * oh * ow; }
};

ConvGeom make_geom(const ConvSpec& spec, Index batch, const std::vector<Index>& in_spatial) {
  spec.validate();
  ConvGeom g;
  g.batch = batch;
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  const int nd = spec.spatial_dims();
  const int off = 3 - nd;
  Index* in[3] = {&g.d, &g.h, &g.w};
  Index* out[3] = {&g.od, &g.oh, &g.ow};
  Index* k[3] = {&g.kd, &g.kh, &g.kw};
  Index* s[3] = {&g.sd, &g.sh, &g.sw};
  Index* p[3] = {&g.pd, &g.ph, &g.pw};
  for (int i = 0; i < nd; ++i) {
    *in[off + i] = in_spatial[i];
    *k[off + i] = spec.kernel[i];
    *s[off + i] = spec.stride[i];
    *p[off + i] = spec.padding[i];
    const Index o = spec.output_extent(i, in_spatial[i]);
    if (o < 1) {
      throw ShapeError("conv: input extent " + std::to_string(in_spatial[i]) + " in spatial dim " +
                       std::to_string(i) + " admits no output position for kernel " +
                       std::to_string(spec.kernel[i]));
    }
    *out[off + i] = o;
  }
  return g;
}

Index floor_div(Index a, Index b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output columns [lo, hi) whose input column ow * sw - pw + e lies in [0, w).
std::pair<Index, Index> valid_columns(const ConvGeom& g, Index e) {
  const Index lo = std::clamp<Index>(-floor_div(e - g.pw, g.sw), 0, g.ow);
  const Index hi = std::clamp<Index>(floor_div(g.w - 1 + g.pw - e, g.sw) + 1, lo, g.ow);
  return {lo, hi};
}

// Number of output depth planes processed per GEMM, bounded by a column
// buffer budget.
Index planes_per_chunk(const ConvGeom& g) {
  constexpr Index kBudget = Index{1} << 23;
  const Index per_plane = g.k() * g.out_plane();
  return std::clamp<Index>(kBudget / std::max<Index>(per_plane, 1), 1, g.od);
}

// Gathers input patches of output planes [od0, od0 + np) into a row-major
// [K, np * OH * OW] column matrix.
template <typename T>
void im2col(const T* x, const ConvGeom& g, Index od0, Index np, T* cols) {
  const Index ncols = np * g.out_plane();
  Index row = 0;
  for (Index c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.in_volume();
    for (Index a = 0; a < g.kd; ++a)
      for (Index b = 0; b < g.kh; ++b)
        for (Index e = 0; e < g.kw; ++e, ++row) {
          T* dst = cols + row * ncols;
          // Output columns whose input column index lands inside [0, w).
          const auto [ow_lo, ow_hi] = valid_columns(g, e);
          for (Index p = 0; p < np; ++p) {
            const Index id = (od0 + p) * g.sd - g.pd + a;
            for (Index y = 0; y < g.oh; ++y) {
              T* out = dst + (p * g.oh + y) * g.ow;
              const Index ih = y * g.sh - g.ph + b;
              if (id < 0 || id >= g.d || ih < 0 || ih >= g.h) {
                std::fill(out, out + g.ow, T(0));
                continue;
              }
              const T* src = xc + (id * g.h + ih) * g.w;
              std::fill(out, out + ow_lo, T(0));
              if (g.sw == 1) {
                const Index shift = e - g.pw;
                std::copy(src + ow_lo + shift, src + ow_hi + shift, out + ow_lo);
              } else {
                for (Index x = ow_lo; x < ow_hi; ++x) out[x] = src[x * g.sw - g.pw + e];
              }
              std::fill(out + ow_hi, out + g.ow, T(0));
            }
          }
        }
  }
}

// Adjoint of im2col: scatter-adds column entries back into the input.
template <typename T>
void col2im(const T* cols, const ConvGeom& g, Index od0, Index np, T* x) {
  const Index ncols = np * g.out_plane();
  Index row = 0;
  for (Index c = 0; c < g.cin; ++c) {
    T* xc = x + c * g.in_volume();
    for (Index a = 0; a < g.kd; ++a)
      for (Index b = 0; b < g.kh; ++b)
        for (Index e = 0; e < g.kw; ++e, ++row) {
          const T* src = cols + row * ncols;
          const auto [ow_lo, ow_hi] = valid_columns(g, e);
          for (Index p = 0; p < np; ++p) {
            const Index id = (od0 + p) * g.sd - g.pd + a;
            if (id < 0 || id >= g.d) continue;
            for (Index y = 0; y < g.oh; ++y) {
              const Index ih = y * g.sh - g.ph + b;
              if (ih < 0 || ih >= g.h) continue;
              const T* in = src + (p * g.oh + y) * g.ow;
              T* dst = xc + (id * g.h + ih) * g.w;
              for (Index x = ow_lo; x < ow_hi; ++x) dst[x * g.sw - g.pw + e] += in[x];
            }
          }
        }
  }
}

// y[n] = W * im2col(x[n]) + b.
template <typename T>
void conv_forward(const T* x, const T* w, const T* bias, const ConvGeom& g, T* y) {
  using Mat = MatRM<T>;
  using Stride = Eigen::OuterStride<>;
  const Index chunk = planes_per_chunk(g);
  Mat cols(g.k(), chunk * g.out_plane());
  Eigen::Map<const Mat> wm(w, g.cout, g.k());
  for (Index n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.cin * g.in_volume();
    T* yn = y + n * g.cout * g.out_volume();
    for (Index od0 = 0; od0 < g.od; od0 += chunk) {
      const Index np = std::min(chunk, g.od - od0);
      const Index ncols = np * g.out_plane();
      im2col(xn, g, od0, np, cols.data());
      Eigen::Map<Mat, 0, Stride> ym(yn + od0 * g.out_plane(), g.cout, ncols,
                                    Stride(g.out_volume()));
      ym.noalias() = wm * Eigen::Map<const Mat>(cols.data(), g.k(), ncols);
      if (bias) {
        for (Index co = 0; co < g.cout; ++co) ym.row(co).array() += bias[co];
      }
    }
  }
}

// dx[n] += col2im(W^T * dy[n]).
template <typename T>
void conv_backward_data(const T* dy, const T* w, const ConvGeom& g, T* dx) {
  using Mat = MatRM<T>;
  using Stride = Eigen::OuterStride<>;
  const Index chunk = planes_per_chunk(g);
  Mat cols(g.k(), chunk * g.out_plane());
  Eigen::Map<const Mat> wm(w, g.cout, g.k());
  for (Index n = 0; n < g.batch; ++n) {
    const T* dyn = dy + n * g.cout * g.out_volume();
    T* dxn = dx + n * g.cin * g.in_volume();
    for (Index od0 = 0; od0 < g.od; od0 += chunk) {
      const Index np = std::min(chunk, g.od - od0);
      const Index ncols = np * g.out_plane();
      Eigen::Map<const Mat, 0, Stride> dym(dyn + od0 * g.out_plane(), g.cout, ncols,
                                           Stride(g.out_volume()));
      Eigen::Map<Mat> cm(cols.data(), g.k(), ncols);
      cm.noalias() = wm.transpose() * dym;
      col2im(cols.data(), g, od0, np, dxn);
    }
  }
}

// dW += dy * im2col(x)^T, db += row sums of dy.
template <typename T>
void conv_backward_weight(const T* x, const T* dy, const ConvGeom& g, T* dw, T* db) {
  using Mat = MatRM<T>;
  using Stride = Eigen::OuterStride<>;
  const Index chunk = planes_per_chunk(g);
  Mat cols(g.k(), chunk * g.out_plane());
  Eigen::Map<Mat> dwm(dw, g.cout, g.k());
  for (Index n = 0; n < g.batch; ++n) {
    const T* xn = x + n * g.cin * g.in_volume();
    const T* dyn = dy + n * g.cout * g.out_volume();
    for (Index od0 = 0; od0 < g.od; od0 += chunk) {
      const Index np = std::min(chunk, g.od - od0);
      const Index ncols = np * g.out_plane();
      Eigen::Map<const Mat, 0, Stride> dym(dyn + od0 * g.out_plane(), g.cout, ncols,
                                           Stride(g.out_volume()));
      if (dw) {
        im2col(xn, g, od0, np, cols.data());
        dwm.noalias() += dym * Eigen::Map<const Mat>(cols.data(), g.k(), ncols).transpose();
      }
      if (db) {
        for (Index co = 0; co < g.cout; ++co) db[co] += dym.row(co).sum();
      }
    }
  }
}

template <typename T>
void check_conv_operands(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         const ConvSpec& spec, int nd, const char* op) {
  spec.validate();
  if (spec.spatial_dims() != nd) {
    throw ShapeError(std::string(op) + ": spec has " + std::to_string(spec.spatial_dims()) +
                     " spatial dims, expected " + std::to_string(nd));
  }
  if (input.rank() != nd + 2) {
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(nd + 2) +
                     " input, got " + to_string(input.shape()));
  }
  if (input.dim(1) != spec.in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input.dim(1)) +
                     " channels, spec expects " + std::to_string(spec.in_channels));
  }
  if (weight.shape() != spec.weight_shape()) {
    throw ShapeError(std::string(op) + ": weight shape " + to_string(weight.shape()) +
                     ", expected " + to_string(spec.weight_shape()));
  }
  if (bias.defined() && bias.shape() != Shape{spec.out_channels}) {
    throw ShapeError(std::string(op) + ": bias shape " + to_string(bias.shape()) + ", expected [" +
                     std::to_string(spec.out_channels) + "]");
  }
}

template <typename T>
Tensor<T> conv_nd(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                  const ConvSpec& spec, int nd, const char* op) {
  check_conv_operands(input, weight, bias, spec, nd, op);
  const std::vector<Index> in_spatial(input.shape().begin() + 2, input.shape().end());
  const ConvGeom g = make_geom(spec, input.dim(0), in_spatial);
  Shape out_shape{g.batch, g.cout};
  for (int i = 0; i < nd; ++i) out_shape.push_back(spec.output_extent(i, in_spatial[i]));

  typename Tensor<T>::Array y(numel(out_shape));
  conv_forward(input.data(), weight.data(), bias.defined() ? bias.data() : nullptr, g, y.data());

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor<T>::make_result(out_shape, std::move(y), inputs,
                                [input, weight, bias, g](const auto& gy) {
                                  if (auto* s = input.grad_sink()) {
                                    conv_backward_data(gy.data(), weight.data(), g, s->data());
                                  }
                                  auto* sw = weight.grad_sink();
                                  auto* sb = bias.defined() ? bias.grad_sink() : nullptr;
                                  if (sw || sb) {
                                    conv_backward_weight(input.data(), gy.data(), g,
                                                         sw ? sw->data() : nullptr,
                                                         sb ? sb->data() : nullptr);
                                  }
                                });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec) {
  return conv_nd(input, weight, bias, spec, 2, "conv2d");
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec) {
  return conv_nd(input, weight, bias, spec, 3, "conv3d");
}

template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           const ConvSpec& spec, const std::vector<Index>& output_spatial) {
  spec.validate();
  if (spec.spatial_dims() != 3 || input.rank() != 5) {
    throw ShapeError("conv_transpose3d: expected rank-5 input and a 3D spec, got " +
                     to_string(input.shape()));
  }
  if (input.dim(1) != spec.in_channels) {
    throw ShapeError("conv_transpose3d: input has " + std::to_string(input.dim(1)) +
                     " channels, spec expects " + std::to_string(spec.in_channels));
  }
  // The adjoint convolution maps out_channels -> in_channels.
  ConvSpec fwd = spec;
  std::swap(fwd.in_channels, fwd.out_channels);
  if (weight.shape() != fwd.weight_shape()) {
    throw ShapeError("conv_transpose3d: weight shape " + to_string(weight.shape()) +
                     ", expected " + to_string(fwd.weight_shape()));
  }
  if (bias.defined() && bias.shape() != Shape{spec.out_channels}) {
    throw ShapeError("conv_transpose3d: bias shape " + to_string(bias.shape()));
  }
  if (output_spatial.size() != 3) throw ShapeError("conv_transpose3d: need 3 output extents");
  for (int i = 0; i < 3; ++i) {
    if (fwd.output_extent(i, output_spatial[i]) != input.dim(2 + i)) {
      throw ShapeError("conv_transpose3d: target extent " + std::to_string(output_spatial[i]) +
                       " in dim " + std::to_string(i) + " does not map back onto input extent " +
                       std::to_string(input.dim(2 + i)));
    }
  }
  const ConvGeom g = make_geom(fwd, input.dim(0), output_spatial);
  Shape out_shape{g.batch, spec.out_channels, output_spatial[0], output_spatial[1],
                  output_spatial[2]};
  typename Tensor<T>::Array y = Tensor<T>::Array::Zero(numel(out_shape));
  conv_backward_data(input.data(), weight.data(), g, y.data());
  if (bias.defined()) {
    const Index vol = g.in_volume();
    for (Index n = 0; n < g.batch; ++n)
      for (Index c = 0; c < spec.out_channels; ++c)
        y.segment((n * spec.out_channels + c) * vol, vol) += bias[c];
  }

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor<T>::make_result(
      out_shape, std::move(y), inputs, [input, weight, bias, g](const auto& gy) {
        if (auto* s = input.grad_sink()) {
          typename Tensor<T>::Array tmp(s->size());
          conv_forward(gy.data(), weight.data(), static_cast<const T*>(nullptr), g, tmp.data());
          *s += tmp;
        }
        if (auto* sw = weight.grad_sink()) {
          // Roles swap: the output gradient is the forward conv's input.
          conv_backward_weight(gy.data(), input.data(), g, sw->data(), static_cast<T*>(nullptr));
        }
        if (bias.defined()) {
          if (auto* sb = bias.grad_sink()) {
            const Index vol = g.in_volume();
            for (Index n = 0; n < g.batch; ++n)
              for (Index c = 0; c < g.cin; ++c)
                (*sb)[c] += gy.segment((n * g.cin + c) * vol, vol).sum();
          }
        }
      });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>* stats, NormMode mode, T eps, T momentum) {
  if (input.rank() < 2) throw ShapeError("batch_norm: input needs a channel dim");
  const Index n = input.dim(0), c = input.dim(1);
  const Index inner = input.numel() / (n * c);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("batch_norm: gamma/beta must have shape [" + std::to_string(c) + "], got " +
                     to_string(gamma.shape()) + " / " + to_string(beta.shape()));
  }
  if (stats && (stats->mean.numel() != c || stats->var.numel() != c)) {
    throw ShapeError("batch_norm: running statistics do not match channel count");
  }
  if (mode == NormMode::kEval && !stats) throw ShapeError("batch_norm: eval mode needs running stats");

  using Array = typename Tensor<T>::Array;
  const Index count = n * inner;
  Array mu(c), inv_std(c);
  const T* x = input.data();
  if (mode != NormMode::kEval) {
    for (Index ch = 0; ch < c; ++ch) {
      T s = 0;
      for (Index b = 0; b < n; ++b)
        s += Eigen::Map<const Array>(x + (b * c + ch) * inner, inner).sum();
      const T m = s / static_cast<T>(count);
      T v = 0;
      for (Index b = 0; b < n; ++b)
        v += (Eigen::Map<const Array>(x + (b * c + ch) * inner, inner) - m).square().sum();
      v /= static_cast<T>(count);
      mu[ch] = m;
      inv_std[ch] = T(1) / std::sqrt(v + eps);
      if (stats && mode == NormMode::kTraining) {
        const T unbiased = count > 1 ? v * static_cast<T>(count) / static_cast<T>(count - 1) : v;
        stats->mean[ch] = (T(1) - momentum) * stats->mean[ch] + momentum * m;
        stats->var[ch] = (T(1) - momentum) * stats->var[ch] + momentum * unbiased;
      }
    }
  } else {
    for (Index ch = 0; ch < c; ++ch) {
      mu[ch] = stats->mean[ch];
      inv_std[ch] = T(1) / std::sqrt(stats->var[ch] + eps);
    }
  }

  Array xhat(input.numel()), y(input.numel());
  for (Index b = 0; b < n; ++b)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (b * c + ch) * inner;
      xhat.segment(off, inner) =
          (Eigen::Map<const Array>(x + off, inner) - mu[ch]) * inv_std[ch];
      y.segment(off, inner) = xhat.segment(off, inner) * gamma[ch] + beta[ch];
    }

  const bool training = mode != NormMode::kEval;
  return Tensor<T>::make_result(
      input.shape(), std::move(y), {input, gamma, beta},
      [input, gamma, beta, xhat, inv_std, n, c, inner, count, training](const Array& g) {
        auto* sx = input.grad_sink();
        auto* sg = gamma.grad_sink();
        auto* sb = beta.grad_sink();
        for (Index ch = 0; ch < c; ++ch) {
          T sum_g = 0, sum_gx = 0;
          for (Index b = 0; b < n; ++b) {
            const Index off = (b * c + ch) * inner;
            sum_g += g.segment(off, inner).sum();
            sum_gx += (g.segment(off, inner) * xhat.segment(off, inner)).sum();
          }
          if (sg) (*sg)[ch] += sum_gx;
          if (sb) (*sb)[ch] += sum_g;
          if (!sx) continue;
          const T k = gamma[ch] * inv_std[ch];
          const T mean_g = sum_g / static_cast<T>(count);
          const T mean_gx = sum_gx / static_cast<T>(count);
          for (Index b = 0; b < n; ++b) {
            const Index off = (b * c + ch) * inner;
            if (training) {
              sx->segment(off, inner) +=
                  k * (g.segment(off, inner) - mean_g - xhat.segment(off, inner) * mean_gx);
            } else {
              sx->segment(off, inner) += k * g.segment(off, inner);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> avg_pool2x(const Tensor<T>& input) {
  if (input.rank() < 2) throw ShapeError("avg_pool2x: need at least 2 dims");
  const Index h = input.dim(-2), w = input.dim(-1);
  if (h % 2 || w % 2) {
    throw ShapeError("avg_pool2x: spatial extents must be even, got " + to_string(input.shape()));
  }
  const Index planes = input.numel() / (h * w), oh = h / 2, ow = w / 2;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  typename Tensor<T>::Array y(numel(out_shape));
  const T* x = input.data();
  for (Index p = 0; p < planes; ++p)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) {
        const T* r0 = x + (p * h + 2 * i) * w + 2 * j;
        y[(p * oh + i) * ow + j] = T(0.25) * (r0[0] + r0[1] + r0[w] + r0[w + 1]);
      }
  return Tensor<T>::make_result(out_shape, std::move(y), {input},
                                [input, planes, h, w, oh, ow](const auto& g) {
                                  auto* s = input.grad_sink();
                                  if (!s) return;
                                  for (Index p = 0; p < planes; ++p)
                                    for (Index i = 0; i < oh; ++i)
                                      for (Index j = 0; j < ow; ++j) {
                                        const T v = T(0.25) * g[(p * oh + i) * ow + j];
                                        T* r0 = s->data() + (p * h + 2 * i) * w + 2 * j;
                                        r0[0] += v;
                                        r0[1] += v;
                                        r0[w] += v;
                                        r0[w + 1] += v;
                                      }
                                });
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& input) {
  if (input.rank() < 2) throw ShapeError("upsample2x: need at least 2 dims");
  const Index h = input.dim(-2), w = input.dim(-1);
  const Index planes = input.numel() / (h * w), oh = 2 * h, ow = 2 * w;
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  typename Tensor<T>::Array y(numel(out_shape));
  const T* x = input.data();
  for (Index p = 0; p < planes; ++p)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) y[(p * oh + i) * ow + j] = x[(p * h + i / 2) * w + j / 2];
  return Tensor<T>::make_result(out_shape, std::move(y), {input},
                                [input, planes, h, w, oh, ow](const auto& g) {
                                  auto* s = input.grad_sink();
                                  if (!s) return;
                                  for (Index p = 0; p < planes; ++p)
                                    for (Index i = 0; i < oh; ++i)
                                      for (Index j = 0; j < ow; ++j)
                                        (*s)[(p * h + i / 2) * w + j / 2] +=
                                            g[(p * oh + i) * ow + j];
                                });
}

template <typename T>
Tensor<T> box_filter(const Tensor<T>& input, Index window) {
  if (input.rank() < 2) throw ShapeError("box_filter: need at least 2 dims");
  const Index h = input.dim(-2), w = input.dim(-1);
  if (window < 1 || window > h || window > w) {
    throw ShapeError("box_filter: window " + std::to_string(window) + " does not fit " +
                     to_string(input.shape()));
  }
  using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index planes = input.numel() / (h * w), oh = h - window + 1, ow = w - window + 1;
  const T inv = T(1) / static_cast<T>(window * window);
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  typename Tensor<T>::Array y(numel(out_shape));
  Plane tmp(h, ow);
  for (Index p = 0; p < planes; ++p) {
    Eigen::Map<const Plane> x(input.data() + p * h * w, h, w);
    Eigen::Map<Plane> out(y.data() + p * oh * ow, oh, ow);
    tmp = x.middleCols(0, ow);
    for (Index e = 1; e < window; ++e) tmp += x.middleCols(e, ow);
    out = tmp.middleRows(0, oh);
    for (Index a = 1; a < window; ++a) out += tmp.middleRows(a, oh);
    out *= inv;
  }
  return Tensor<T>::make_result(out_shape, std::move(y), {input},
                                [input, planes, h, w, oh, ow, window, inv](const auto& g) {
                                  auto* s = input.grad_sink();
                                  if (!s) return;
                                  Plane tmp(h, ow);
                                  for (Index p = 0; p < planes; ++p) {
                                    Eigen::Map<const Plane> gp(g.data() + p * oh * ow, oh, ow);
                                    Eigen::Map<Plane> dx(s->data() + p * h * w, h, w);
                                    tmp.setZero();
                                    for (Index a = 0; a < window; ++a) tmp.middleRows(a, oh) += gp;
                                    tmp *= inv;
                                    for (Index e = 0; e < window; ++e) dx.middleCols(e, ow) += tmp;
                                  }
                                });
}

#define SVS_INSTANTIATE_NN(T)                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                            const ConvSpec&);                                                  \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                            const ConvSpec&);                                                  \
  template Tensor<T> conv_transpose3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                      const ConvSpec&, const std::vector<Index>&);             \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                RunningStats<T>*, NormMode, T, T);                             \
  template Tensor<T> avg_pool2x(const Tensor<T>&);                                             \
  template Tensor<T> upsample2x(const Tensor<T>&);                                             \
  template Tensor<T> box_filter(const Tensor<T>&, Index);

SVS_INSTANTIATE_NN(float)
SVS_INSTANTIATE_NN(double)

}  // namespace svs
