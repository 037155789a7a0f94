#pragma once

// Unsupervised stereo objective (photometric L1 + multi-window DSSIM,
// left-right disparity consistency, edge-aware smoothness) and the L1
// reconstruction loss of the inpainting network.

#include "svs/geometry.hpp"

namespace svs {

struct LossWeights {
  double lambda0 = 5.0;     // photometric
  double lambda1 = 0.01;    // left-right consistency
  double lambda2 = 0.0005;  // smoothness
  double photo_l1 = 0.2;
  double photo_ssim3 = 0.8;
  double photo_ssim5 = 0.2;
  double photo_ssim7 = 0.2;

  void validate() const;
  /// Every weight multiplied by c.
  LossWeights scaled(double c) const;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Per-pixel SSIM over uniform window x window neighbourhoods, evaluated at
/// every fully contained window: [C,H,W] -> [C,H-k+1,W-k+1].
template <typename T>
Tensor<T> ssim_map(const Tensor<T>& a, const Tensor<T>& b, Index window);

/// Mean of (1 - SSIM)/2 over window centres. With a [1,H,W] mask only centres
/// where the mask is set contribute.
template <typename T>
Tensor<T> dssim(const Tensor<T>& a, const Tensor<T>& b, Index window,
                const Tensor<T>* mask = nullptr);

/// Mean over pixels and channels of |a - b|, restricted to a [1,H,W] mask.
template <typename T>
Tensor<T> masked_l1(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>* mask = nullptr);

/// Photometric term: photo_l1 * (L1_left + L1_right) + sum over windows
/// 3, 5, 7 of photo_ssim_s * (DSSIM_left + DSSIM_right). Masks are optional.
template <typename T>
Tensor<T> photometric_loss(const Tensor<T>& x_l, const Tensor<T>& x_r, const Tensor<T>& rec_l,
                           const Tensor<T>& rec_r, const LossWeights& w,
                           const Tensor<T>* mask_l = nullptr, const Tensor<T>* mask_r = nullptr);

/// mean |warp(D_R by D_L) - D_L| + mean |warp(D_L by D_R) - D_R|.
template <typename T>
Tensor<T> lr_consistency_loss(const Tensor<T>& d_l, const Tensor<T>& d_r,
                              StereoConvention convention = StereoConvention::kRightCameraAtPositiveX,
                              bool mask_borders = false);

/// mean |dx D| exp(-|dx X|) + mean |dy D| exp(-|dy X|) with forward
/// differences and the image gradient averaged over channels. D is [1,H,W].
template <typename T>
Tensor<T> smoothness_loss(const Tensor<T>& disparity, const Tensor<T>& image);

/// lambda0 * photometric + lambda1 * lr + lambda2 * smoothness.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& photometric, const Tensor<T>& lr,
                     const Tensor<T>& smoothness, const LossWeights& w);

/// Valid-sample mask [1,H,W] for reconstructing `side`: samples whose source
/// coordinate stays inside the other image, minus a one-pixel frame.
template <typename T>
Tensor<T> stereo_valid_mask(const Tensor<T>& disparity, StereoSide side,
                            StereoConvention convention);

template <typename T>
struct StereoLoss {
  Tensor<T> total;
  Tensor<T> photometric;
  Tensor<T> lr;
  Tensor<T> smoothness;
};

struct StereoLossOptions {
  /// Drop border and out-of-frame samples from the warping terms. When off,
  /// every pixel counts, exactly as the unmasked objective is written.
  bool mask_borders = true;
  StereoConvention convention = StereoConvention::kRightCameraAtPositiveX;
};

/// Complete objective for one stereo pair and its predicted disparities.
template <typename T>
StereoLoss<T> stereo_objective(const Tensor<T>& x_l, const Tensor<T>& x_r, const Tensor<T>& d_l,
                               const Tensor<T>& d_r, const LossWeights& w,
                               const StereoLossOptions& options = {});

/// Mean absolute error over pixels and channels.
template <typename T>
Tensor<T> inpaint_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace svs
