#include "doctest.h"
#include "helpers.hpp"

#include "svs/layers.hpp"

using namespace svs;
using svs::test::random_tensor;

namespace {

// Direct summation over the kernel; the oracle for conv2d.
Tensor<double> naive_conv2d(const Tensor<double>& x, const Tensor<double>& w,
                            const Tensor<double>& b, const ConvSpec& s) {
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index o = s.out_channels, kh = s.kernel[0], kw = s.kernel[1];
  const Index oh = s.output_extent(0, h), ow = s.output_extent(1, wd);
  Tensor<double> out({n, o, oh, ow});
  for (Index b_ = 0; b_ < n; ++b_)
    for (Index oc = 0; oc < o; ++oc)
      for (Index y = 0; y < oh; ++y)
        for (Index xx = 0; xx < ow; ++xx) {
          double acc = b[oc];
          for (Index ic = 0; ic < c; ++ic)
            for (Index ky = 0; ky < kh; ++ky)
              for (Index kx = 0; kx < kw; ++kx) {
                const Index iy = y * s.stride[0] - s.padding[0] + ky;
                const Index ix = xx * s.stride[1] - s.padding[1] + kx;
                if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
                acc += w.at({oc, ic, ky, kx}) * x.at({b_, ic, iy, ix});
              }
          out.at({b_, oc, y, xx}) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches direct summation") {
  for (Index stride : {1, 2}) {
    const ConvSpec spec = ConvSpec::same(2, 3, 4, 3, stride);
    const auto x = random_tensor({2, 3, 7, 6}, 1);
    const auto w = random_tensor(spec.weight_shape(), 2);
    const auto b = random_tensor({4}, 3);
    const auto y = conv2d(x, w, b, spec);
    CHECK(svs::test::max_abs_diff(y, naive_conv2d(x, w, b, spec)) < 1e-12);
  }
}

TEST_CASE("1x1 identity conv2d returns its input") {
  const ConvSpec spec = ConvSpec::same(2, 3, 3, 1);
  Tensor<double> w(spec.weight_shape());
  for (Index c = 0; c < 3; ++c) w.at({c, c, 0, 0}) = 1.0;
  const auto x = random_tensor({1, 3, 5, 5}, 4);
  CHECK(svs::test::bit_identical(conv2d(x, w, Tensor<double>::zeros({3}), spec), x));
}

TEST_CASE("3x3 ones kernel on a constant image sums to 9v inside") {
  const ConvSpec spec = ConvSpec::same(2, 1, 1, 3);
  const auto y = conv2d(Tensor<double>::full({1, 1, 6, 6}, 0.7), Tensor<double>::ones(spec.weight_shape()),
                        Tensor<double>::zeros({1}), spec);
  for (Index r = 1; r < 5; ++r)
    for (Index c = 1; c < 5; ++c) CHECK(y.at({0, 0, r, c}) == doctest::Approx(6.3));
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(2.8));
}

TEST_CASE("5x5 stride-2 conv halves a 64x64 input") {
  const ConvSpec spec = ConvSpec::same(2, 3, 32, 5, 2);
  CHECK(spec.output_extent(0, 64) == 32);
  const auto y = conv2d(Tensor<float>::zeros({1, 3, 64, 64}), Tensor<float>::zeros(spec.weight_shape()),
                        Tensor<float>::zeros({32}), spec);
  CHECK(y.shape() == Shape{1, 32, 32, 32});
}

TEST_CASE("conv rejects channel mismatch") {
  const ConvSpec spec = ConvSpec::same(2, 3, 4, 3);
  CHECK_THROWS_AS(conv2d(Tensor<float>::zeros({1, 2, 8, 8}), Tensor<float>::zeros(spec.weight_shape()),
                         Tensor<float>::zeros({4}), spec),
                  ShapeError);
}

TEST_CASE("conv3d identity and stride-2 halving") {
  const ConvSpec id = ConvSpec::same(3, 2, 2, 1);
  Tensor<double> w(id.weight_shape());
  w.at({0, 0, 0, 0, 0}) = 1.0;
  w.at({1, 1, 0, 0, 0}) = 1.0;
  const auto x = random_tensor({1, 2, 4, 4, 4}, 5);
  CHECK(svs::test::bit_identical(conv3d(x, w, Tensor<double>::zeros({2}), id), x));

  const ConvSpec s2 = ConvSpec::same(3, 2, 3, 3, 2);
  const auto y = conv3d(x, random_tensor(s2.weight_shape(), 6), Tensor<double>::zeros({3}), s2);
  CHECK(y.shape() == Shape{1, 3, 2, 2, 2});
}

TEST_CASE("conv3d weight gradient of sum(output) is the sum of touched inputs") {
  const ConvSpec spec = ConvSpec::same(3, 1, 1, 3);
  const auto x = random_tensor({1, 1, 3, 4, 5}, 7);
  auto w = random_tensor(spec.weight_shape(), 8);
  w.requires_grad_();
  sum(conv3d(x, w, Tensor<double>::zeros({1}), spec)).backward();
  // Centre tap touches every input element exactly once.
  CHECK(w.grad()[13] == doctest::Approx(x.values().sum()));
  // Tap (0,0,0) touches inputs with all indices below the last.
  double corner = 0.0;
  for (Index d = 0; d < 2; ++d)
    for (Index h = 0; h < 3; ++h)
      for (Index wd = 0; wd < 4; ++wd) corner += x.at({0, 0, d, h, wd});
  CHECK(w.grad()[0] == doctest::Approx(corner));
}

TEST_CASE("transposed conv3d is the adjoint of conv3d") {
  for (Index stride : {1, 2}) {
    const ConvSpec spec = ConvSpec::same(3, 2, 3, 3, stride);
    const auto w = random_tensor(spec.weight_shape(), 9);
    const auto x = random_tensor({1, 2, 4, 4, 4}, 10);
    const auto zero_out = Tensor<double>::zeros({3});
    const auto cx = conv3d(x, w, zero_out, spec);
    const auto y = random_tensor(cx.shape(), 11);
    const ConvSpec back = ConvSpec::same(3, 3, 2, 3, stride);
    const auto ty = conv_transpose3d(y, w, Tensor<double>::zeros({2}), back, {4, 4, 4});
    CHECK(ty.shape() == x.shape());
    CHECK(std::abs(svs::test::dot(cx, y) - svs::test::dot(x, ty)) < 1e-10);
  }
}

TEST_CASE("transposed conv3d doubles strided extents and broadcasts bias") {
  const ConvSpec spec = ConvSpec::same(3, 2, 3, 3, 2);
  const auto bias = random_tensor({2}, 12);
  const auto y = conv_transpose3d(Tensor<double>::zeros({1, 3, 2, 4, 4}),
                                  random_tensor(spec.weight_shape(), 13), bias,
                                  ConvSpec::same(3, 3, 2, 3, 2), {4, 8, 8});
  CHECK(y.shape() == Shape{1, 2, 4, 8, 8});
  for (Index i = 0; i < y.numel(); ++i) CHECK(y[i] == bias[i / (4 * 8 * 8)]);
}

TEST_CASE("batch norm identities") {
  const auto gamma = random_tensor({2}, 14, 0.5, 2.0);
  const auto beta = random_tensor({2}, 15);

  SUBCASE("constant channel maps to beta") {
    Tensor<double> x({1, 2, 3, 3});
    for (Index i = 0; i < 9; ++i) x[i] = 0.3, x[9 + i] = -2.0;
    RunningStats<double> stats(2);
    const auto y = batch_norm(x, gamma, beta, &stats, NormMode::kTraining);
    for (Index i = 0; i < 18; ++i) CHECK(y[i] == doctest::Approx(beta[i / 9]).epsilon(1e-12));
  }

  SUBCASE("standardized input passes through with unit gamma") {
    auto x = random_tensor({1, 2, 4, 4}, 16);
    for (Index c = 0; c < 2; ++c) {
      auto seg = x.values().segment(c * 16, 16);
      seg -= seg.mean();
      seg /= std::sqrt(seg.square().mean());
    }
    const auto y = batch_norm(x, Tensor<double>::ones({2}), Tensor<double>::zeros({2}),
                              static_cast<RunningStats<double>*>(nullptr), NormMode::kTraining);
    const double shrink = 1.0 / std::sqrt(1.0 + kBatchNormEps);
    for (Index i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i] * shrink).epsilon(1e-12));
  }

  SUBCASE("eval mode applies the stored affine map") {
    RunningStats<double> stats(2);
    stats.mean[0] = 0.5, stats.mean[1] = -1.0;
    stats.var[0] = 4.0, stats.var[1] = 0.25;
    const auto x = random_tensor({1, 2, 3, 3}, 17);
    const auto y = batch_norm(x, gamma, beta, &stats, NormMode::kEval);
    for (Index i = 0; i < x.numel(); ++i) {
      const Index c = i / 9;
      const double expect = gamma[c] * (x[i] - stats.mean[c]) / std::sqrt(stats.var[c] + kBatchNormEps) + beta[c];
      CHECK(y[i] == doctest::Approx(expect).epsilon(1e-14));
    }
  }

  SUBCASE("sample statistics match training without touching running stats") {
    RunningStats<double> trained(2), frozen(2);
    const auto x = random_tensor({1, 2, 3, 3}, 23);
    const auto a = batch_norm(x, gamma, beta, &trained, NormMode::kTraining);
    const auto b = batch_norm(x, gamma, beta, &frozen, NormMode::kSampleStatistics);
    CHECK(svs::test::bit_identical(a, b));
    CHECK((frozen.mean.values() == 0.0).all());
    CHECK((frozen.var.values() == 1.0).all());
  }

  SUBCASE("training updates running statistics with momentum") {
    RunningStats<double> stats(2);
    const auto x = random_tensor({1, 2, 3, 3}, 18);
    batch_norm(x, gamma, beta, &stats, NormMode::kTraining);
    const double m0 = x.values().head(9).mean();
    CHECK(stats.mean[0] == doctest::Approx(kBatchNormMomentum * m0));
  }
}

TEST_CASE("pooling, upsampling and box filter") {
  Tensor<double> x({1, 1, 2, 4}, (Tensor<double>::Array(8) << 1, 2, 3, 4, 5, 6, 7, 8).finished());
  const auto p = avg_pool2x(x);
  CHECK(p.shape() == Shape{1, 1, 1, 2});
  CHECK(p[0] == doctest::Approx(3.5));
  CHECK(p[1] == doctest::Approx(5.5));
  const auto u = upsample2x(p);
  CHECK(u.shape() == Shape{1, 1, 2, 4});
  CHECK(u[5] == doctest::Approx(3.5));
  CHECK(u[7] == doctest::Approx(5.5));
  const auto bx = box_filter(x, 2);
  CHECK(bx.shape() == Shape{1, 1, 1, 3});
  CHECK(bx[0] == doctest::Approx(3.5));
  CHECK(bx[2] == doctest::Approx(5.5));
}

TEST_CASE("residual block keeps shape") {
  std::mt19937_64 rng(19);
  for (bool norm : {false, true}) {
    ResidualBlock<float> block("res", 2, 4, rng, norm, BlockOrder::kReluThenNorm);
    const auto x = random_tensor<float>({1, 4, 6, 10}, 20);
    CHECK(block(x, NormMode::kTraining).shape() == x.shape());
  }
  ResidualBlock<float> block3("res3", 3, 2, rng, true, BlockOrder::kNormThenRelu);
  const auto v = random_tensor<float>({1, 2, 2, 4, 4}, 21);
  CHECK(block3(v, NormMode::kTraining).shape() == v.shape());
}

TEST_CASE("conv weights use bounded fan-in initialization") {
  std::mt19937_64 rng(22);
  const ConvSpec spec = ConvSpec::same(2, 8, 16, 3);
  Conv<float> conv("c", spec, rng);
  const double bound = std::sqrt(6.0 / (8 * 9));
  CHECK(conv.weight().values().abs().maxCoeff() <= bound);
  CHECK(conv.weight().values().abs().maxCoeff() > 0.5 * bound);
  CHECK((conv.bias().values() == 0.0f).all());
}
