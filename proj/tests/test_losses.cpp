#include "doctest.h"
#include "helpers.hpp"

#include "svs/losses.hpp"

using namespace svs;
using svs::test::random_tensor;

namespace {

LossWeights l1_only() {
  LossWeights w;
  w.photo_ssim3 = w.photo_ssim5 = w.photo_ssim7 = 0.0;
  return w;
}

}  // namespace

TEST_CASE("photometric loss") {
  const auto xl = random_tensor({3, 12, 12}, 1, 0.0, 1.0);
  const auto xr = random_tensor({3, 12, 12}, 2, 0.0, 1.0);
  CHECK(photometric_loss(xl, xr, xl, xr, LossWeights{}).item() == 0.0);

  const auto zeros = Tensor<double>::zeros({3, 8, 8});
  const auto ones = Tensor<double>::ones({3, 8, 8});
  const LossWeights w = l1_only();
  CHECK(photometric_loss(zeros, zeros, ones, ones, w).item() == doctest::Approx(2.0 * w.photo_l1));
  CHECK_THROWS_AS(photometric_loss(zeros, zeros, Tensor<double>::zeros({3, 8, 7}), zeros, w), ShapeError);
}

TEST_CASE("SSIM") {
  const auto x = random_tensor({3, 9, 9}, 3, 0.0, 1.0);
  for (Index win : {3, 5, 7}) {
    const auto s = ssim_map(x, x, win);
    CHECK(s.shape() == Shape{3, 10 - win, 10 - win});
    CHECK((s.values() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(dssim(x, x, win).item() == doctest::Approx(0.0));
  }
  CHECK_THROWS(ssim_map(x, x, 4));

  const auto a = Tensor<double>::full({1, 7, 7}, 0.5);
  const auto b = Tensor<double>::full({1, 7, 7}, 0.6);
  const double expect = (2 * 0.5 * 0.6 + kSsimC1) / (0.25 + 0.36 + kSsimC1);
  CHECK(std::abs(expect - 0.98363) < 5e-5);
  const auto s = ssim_map(a, b, 3);
  for (Index i = 0; i < s.numel(); ++i) CHECK(s[i] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("DSSIM mask restricts the average") {
  const auto a = random_tensor({1, 8, 8}, 4, 0.0, 1.0);
  const auto b = random_tensor({1, 8, 8}, 5, 0.0, 1.0);
  CHECK(dssim(a, b, 3).item() > 0.0);
  auto mask = Tensor<double>::zeros({1, 8, 8});
  // Only centres whose window lies on identical pixels contribute.
  auto b2 = Tensor<double>(b.shape(), b.values());
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) b2[r * 8 + c] = a[r * 8 + c];
  mask[1 * 8 + 1] = 1.0;
  mask[2 * 8 + 2] = 1.0;
  CHECK(dssim(a, b2, 3, &mask).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("left-right consistency") {
  const auto zero = Tensor<double>::zeros({1, 6, 10});
  CHECK(lr_consistency_loss(zero, zero).item() == 0.0);

  // Constant, mutually consistent disparities agree away from the borders.
  const auto d = Tensor<double>::full({1, 6, 40}, 3.0);
  CHECK(lr_consistency_loss(d, d, StereoConvention::kRightCameraAtPositiveX, true).item() ==
        doctest::Approx(0.0));

  // A small bump at one interior pixel changes the loss at first order.
  const double eps = 1e-3;
  auto bumped = Tensor<double>(d.shape(), d.values());
  bumped[3 * 40 + 20] += eps;
  const double rise = lr_consistency_loss(bumped, d, StereoConvention::kRightCameraAtPositiveX, true).item();
  CHECK(rise > 0.0);
  CHECK(rise < 4.0 * eps);
  CHECK(rise * 240 > 0.1 * eps);
}

TEST_CASE("edge-aware smoothness") {
  const auto img = random_tensor({3, 6, 8}, 6, 0.0, 1.0);
  CHECK(smoothness_loss(Tensor<double>::full({1, 6, 8}, 4.0), img).item() == 0.0);

  Tensor<double> ramp({1, 6, 8});
  for (Index i = 0; i < ramp.numel(); ++i) ramp[i] = static_cast<double>(i % 8);
  const double flat = smoothness_loss(ramp, Tensor<double>::full({3, 6, 8}, 0.5)).item();
  CHECK(flat == doctest::Approx(1.0));

  Tensor<double> edges({3, 6, 8});
  for (Index i = 0; i < edges.numel(); ++i) edges[i] = 10.0 * static_cast<double>(i % 8);
  const double edged = smoothness_loss(ramp, edges).item();
  CHECK(edged == doctest::Approx(std::exp(-10.0)));
}

TEST_CASE("total loss weights") {
  const auto one = Tensor<double>::scalar(1.0);
  const auto zero = Tensor<double>::scalar(0.0);
  const LossWeights w;
  CHECK(total_loss(one, one, one, w).item() == doctest::Approx(5.0105).epsilon(1e-12));
  CHECK(total_loss(zero, zero, zero, w).item() == 0.0);
  const auto p = Tensor<double>::scalar(0.3), lr = Tensor<double>::scalar(1.7), s = Tensor<double>::scalar(2.9);
  const double base = total_loss(p, lr, s, w).item();
  CHECK(total_loss(p, lr, s, w.scaled(2.5)).item() == doctest::Approx(2.5 * base).epsilon(1e-14));
  LossWeights neg;
  neg.lambda1 = -1.0;
  CHECK_THROWS(neg.validate());
}

TEST_CASE("inpainting loss") {
  const auto t = random_tensor({3, 5, 5}, 7, 0.0, 0.5);
  CHECK(inpaint_loss(t, t).item() == 0.0);
  auto pred = Tensor<double>(t.shape(), t.values() + 0.5);
  CHECK(inpaint_loss(pred, t).item() == doctest::Approx(0.5));

  auto p = random_tensor({3, 5, 5}, 8, 0.0, 1.0);
  p.requires_grad_();
  inpaint_loss(p, t).backward();
  for (Index i = 0; i < p.numel(); ++i) {
    const double sign = p[i] > t[i] ? 1.0 : -1.0;
    CHECK(p.grad()[i] == doctest::Approx(sign / 75.0));
  }
}

TEST_CASE("stereo objective is zero for a perfect constant-disparity pair") {
  // Right view = left shifted; with the true disparity and border masking
  // the L1 and consistency terms vanish and smoothness of a constant map is
  // zero. SSIM windows that straddle the masked border still see clamped
  // samples, so only the L1 photometric part is checked.
  const Index w = 24;
  Tensor<double> left({3, 8, w}), right({3, 8, w});
  for (Index c = 0; c < 3; ++c)
    for (Index r = 0; r < 8; ++r)
      for (Index x = 0; x < w; ++x) {
        auto f = [&](double u) { return 0.5 + 0.3 * std::sin(0.7 * u + c + 0.4 * r); };
        left.at({c, r, x}) = f(static_cast<double>(x));
        right.at({c, r, x}) = f(static_cast<double>(x) + 2.0);
      }
  const auto d = Tensor<double>::full({1, 8, w}, 2.0);
  const auto loss = stereo_objective(left, right, d, d, l1_only());
  CHECK(loss.photometric.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(loss.lr.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(loss.smoothness.item() == 0.0);
  CHECK(loss.total.item() >= 0.0);
}

TEST_CASE("losses are non-negative on random inputs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_tensor({3, 10, 10}, seed, 0.0, 1.0);
    const auto b = random_tensor({3, 10, 10}, seed + 100, 0.0, 1.0);
    const auto d = random_tensor({1, 10, 10}, seed + 200, 0.0, 3.0);
    CHECK(photometric_loss(a, b, b, a, LossWeights{}).item() >= 0.0);
    CHECK(lr_consistency_loss(d, d).item() >= 0.0);
    CHECK(smoothness_loss(d, a).item() >= 0.0);
    CHECK(inpaint_loss(a, b).item() >= 0.0);
  }
}
