#include "svs/losses.hpp"

#include "svs/nn_ops.hpp"

namespace svs {

void LossWeights::validate() const {
  for (double v : {lambda0, lambda1, lambda2, photo_l1, photo_ssim3, photo_ssim5, photo_ssim7}) {
    if (!(v >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  }
}

LossWeights LossWeights::scaled(double c) const {
  LossWeights w = *this;
  for (double* v : {&w.lambda0, &w.lambda1, &w.lambda2, &w.photo_l1, &w.photo_ssim3,
                    &w.photo_ssim5, &w.photo_ssim7}) {
    *v *= c;
  }
  return w;
}

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes differ: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

/// Constant [C,H,W] copy of a [1,H,W] mask.
template <typename T>
Tensor<T> repeat_channels(const Tensor<T>& mask, Index channels) {
  const Index plane = mask.numel();
  Tensor<T> out({channels, mask.dim(1), mask.dim(2)});
  for (Index c = 0; c < channels; ++c) out.values().segment(c * plane, plane) = mask.values();
  return out;
}

template <typename T>
Tensor<T> masked_mean(const Tensor<T>& x, const Tensor<T>* mask) {
  if (!mask) return mean(x);
  const T count = mask->values().sum() * static_cast<T>(x.dim(0));
  if (count <= T(0)) return sum(x * T(0));
  return scale(sum(x * repeat_channels(*mask, x.dim(0))), T(1) / count);
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, Index border) {
  return narrow(narrow(x, 1, border, x.dim(1) - 2 * border), 2, border, x.dim(2) - 2 * border);
}

}  // namespace

template <typename T>
Tensor<T> ssim_map(const Tensor<T>& a, const Tensor<T>& b, Index window) {
  require_same(a, b, "ssim");
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("ssim window must be odd, got " + std::to_string(window));
  }
  if (a.rank() != 3 || a.dim(1) < window || a.dim(2) < window) {
    throw ShapeError("ssim: image " + to_string(a.shape()) + " smaller than window " +
                     std::to_string(window));
  }
  const T c1 = static_cast<T>(kSsimC1), c2 = static_cast<T>(kSsimC2);
  auto mu_a = box_filter(a, window);
  auto mu_b = box_filter(b, window);
  auto mu_aa = mu_a * mu_a, mu_bb = mu_b * mu_b, mu_ab = mu_a * mu_b;
  auto var_a = box_filter(a * a, window) - mu_aa;
  auto var_b = box_filter(b * b, window) - mu_bb;
  auto cov = box_filter(a * b, window) - mu_ab;
  auto num = (T(2) * mu_ab + c1) * (T(2) * cov + c2);
  auto den = (mu_aa + mu_bb + c1) * (var_a + var_b + c2);
  return num / den;
}

template <typename T>
Tensor<T> dssim(const Tensor<T>& a, const Tensor<T>& b, Index window, const Tensor<T>* mask) {
  auto d = scale(T(1) - ssim_map(a, b, window), T(0.5));
  if (!mask) return mean(d);
  const Tensor<T> centres = crop(*mask, window / 2);
  return masked_mean(d, &centres);
}

template <typename T>
Tensor<T> masked_l1(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>* mask) {
  require_same(a, b, "l1");
  return masked_mean(abs(a - b), mask);
}

template <typename T>
Tensor<T> photometric_loss(const Tensor<T>& x_l, const Tensor<T>& x_r, const Tensor<T>& rec_l,
                           const Tensor<T>& rec_r, const LossWeights& w,
                           const Tensor<T>* mask_l, const Tensor<T>* mask_r) {
  require_same(x_l, rec_l, "photometric");
  require_same(x_r, rec_r, "photometric");
  auto loss = scale(masked_l1(rec_l, x_l, mask_l) + masked_l1(rec_r, x_r, mask_r),
                    static_cast<T>(w.photo_l1));
  const std::pair<Index, double> windows[] = {
      {3, w.photo_ssim3}, {5, w.photo_ssim5}, {7, w.photo_ssim7}};
  for (const auto& [k, weight] : windows) {
    if (weight == 0.0) continue;
    loss = loss + scale(dssim(rec_l, x_l, k, mask_l) + dssim(rec_r, x_r, k, mask_r),
                        static_cast<T>(weight));
  }
  return loss;
}

template <typename T>
Tensor<T> stereo_valid_mask(const Tensor<T>& disparity, StereoSide side,
                            StereoConvention convention) {
  const Index h = disparity.dim(1), w = disparity.dim(2);
  auto mask = in_bounds_mask(stereo_grid(disparity.detach(), side, convention), h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      if (y == 0 || x == 0 || y == h - 1 || x == w - 1) mask[y * w + x] = T(0);
  return mask;
}

template <typename T>
Tensor<T> lr_consistency_loss(const Tensor<T>& d_l, const Tensor<T>& d_r,
                              StereoConvention convention, bool mask_borders) {
  require_same(d_l, d_r, "lr consistency");
  auto rec_l = warp_stereo(d_r, d_l, StereoSide::kLeft, convention);
  auto rec_r = warp_stereo(d_l, d_r, StereoSide::kRight, convention);
  if (!mask_borders) return mean(abs(rec_l - d_l)) + mean(abs(rec_r - d_r));
  const auto ml = stereo_valid_mask(d_l, StereoSide::kLeft, convention);
  const auto mr = stereo_valid_mask(d_r, StereoSide::kRight, convention);
  return masked_l1(rec_l, d_l, &ml) + masked_l1(rec_r, d_r, &mr);
}

template <typename T>
Tensor<T> smoothness_loss(const Tensor<T>& disparity, const Tensor<T>& image) {
  if (disparity.rank() != 3 || disparity.dim(0) != 1 || image.rank() != 3 ||
      image.dim(1) != disparity.dim(1) || image.dim(2) != disparity.dim(2)) {
    throw ShapeError("smoothness: disparity " + to_string(disparity.shape()) +
                     " does not match image " + to_string(image.shape()));
  }
  const Index h = disparity.dim(1), w = disparity.dim(2);
  const auto img = image.detach();
  auto ddx = narrow(disparity, 2, 1, w - 1) - narrow(disparity, 2, 0, w - 1);
  auto ddy = narrow(disparity, 1, 1, h - 1) - narrow(disparity, 1, 0, h - 1);
  auto wx = exp(-mean_dim(abs(narrow(img, 2, 1, w - 1) - narrow(img, 2, 0, w - 1)), 0));
  auto wy = exp(-mean_dim(abs(narrow(img, 1, 1, h - 1) - narrow(img, 1, 0, h - 1)), 0));
  return mean(abs(ddx) * wx) + mean(abs(ddy) * wy);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& photometric, const Tensor<T>& lr,
                     const Tensor<T>& smoothness, const LossWeights& w) {
  return scale(photometric, static_cast<T>(w.lambda0)) + scale(lr, static_cast<T>(w.lambda1)) +
         scale(smoothness, static_cast<T>(w.lambda2));
}

template <typename T>
StereoLoss<T> stereo_objective(const Tensor<T>& x_l, const Tensor<T>& x_r, const Tensor<T>& d_l,
                               const Tensor<T>& d_r, const LossWeights& w,
                               const StereoLossOptions& options) {
  auto rec_l = warp_stereo(x_r, d_l, StereoSide::kLeft, options.convention);
  auto rec_r = warp_stereo(x_l, d_r, StereoSide::kRight, options.convention);
  StereoLoss<T> out;
  if (options.mask_borders) {
    const auto ml = stereo_valid_mask(d_l, StereoSide::kLeft, options.convention);
    const auto mr = stereo_valid_mask(d_r, StereoSide::kRight, options.convention);
    out.photometric = photometric_loss(x_l, x_r, rec_l, rec_r, w, &ml, &mr);
  } else {
    out.photometric = photometric_loss(x_l, x_r, rec_l, rec_r, w);
  }
  out.lr = lr_consistency_loss(d_l, d_r, options.convention, options.mask_borders);
  out.smoothness = smoothness_loss(d_l, x_l) + smoothness_loss(d_r, x_r);
  out.total = total_loss(out.photometric, out.lr, out.smoothness, w);
  return out;
}

template <typename T>
Tensor<T> inpaint_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same(pred, target, "inpaint loss");
  return mean(abs(pred - target));
}

#define SVS_INSTANTIATE_LOSSES(T)                                                             \
  template Tensor<T> ssim_map(const Tensor<T>&, const Tensor<T>&, Index);                     \
  template Tensor<T> dssim(const Tensor<T>&, const Tensor<T>&, Index, const Tensor<T>*);      \
  template Tensor<T> masked_l1(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);         \
  template Tensor<T> photometric_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                      const Tensor<T>&, const LossWeights&, const Tensor<T>*, \
                                      const Tensor<T>*);                                      \
  template Tensor<T> stereo_valid_mask(const Tensor<T>&, StereoSide, StereoConvention);       \
  template Tensor<T> lr_consistency_loss(const Tensor<T>&, const Tensor<T>&, StereoConvention, \
                                         bool);                                               \
  template Tensor<T> smoothness_loss(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                const LossWeights&);                                          \
  template StereoLoss<T> stereo_objective(const Tensor<T>&, const Tensor<T>&,                 \
                                          const Tensor<T>&, const Tensor<T>&,                 \
                                          const LossWeights&, const StereoLossOptions&);      \
  template Tensor<T> inpaint_loss(const Tensor<T>&, const Tensor<T>&);

SVS_INSTANTIATE_LOSSES(float)
SVS_INSTANTIATE_LOSSES(double)

}  // namespace svs
