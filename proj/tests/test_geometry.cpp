#include "doctest.h"
#include "helpers.hpp"

#include "svs/geometry.hpp"
#include "svs/synthetic.hpp"

using namespace svs;
using svs::test::random_tensor;

namespace {

CameraModel test_camera() {
  CameraModel cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 32.0;
  cam.baseline = 0.54;
  return cam;
}

Pose translation(double tx, double ty = 0, double tz = 0) {
  Pose p;
  p.translation = Eigen::Vector3d(tx, ty, tz);
  return p;
}

}  // namespace

TEST_CASE("disparity to depth") {
  CameraModel cam;
  cam.fx = 718.856;
  cam.baseline = 0.54;
  const auto z = disparity_to_depth(Tensor<float>::full({1, 1, 1}, 100.0f), cam, 0.5).depth;
  CHECK(z[0] == doctest::Approx(3.8818).epsilon(1e-4));

  const float unit = static_cast<float>(cam.fx * cam.baseline);
  CHECK(disparity_to_depth(Tensor<float>::full({1, 1, 1}, unit), cam, 0.5).depth[0] ==
        doctest::Approx(1.0));

  Tensor<float> d({1, 1, 2}, (Tensor<float>::Array(2) << 10.0f, 20.0f).finished());
  const auto zz = disparity_to_depth(d, cam, 0.5).depth;
  CHECK(zz[1] == doctest::Approx(zz[0] / 2));

  Tensor<float> low({1, 1, 3}, (Tensor<float>::Array(3) << 0.0f, 0.1f, 5.0f).finished());
  const auto conv = disparity_to_depth(low, cam, 0.5);
  CHECK(conv.clamped == 2);
  CHECK(conv.depth[0] == doctest::Approx(cam.fx * cam.baseline / 0.5));
}

TEST_CASE("camera and pose validation") {
  CameraModel cam;
  cam.fx = -1;
  CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
  Pose p;
  p.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  Pose q;
  q.rotation = Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  q.translation = Eigen::Vector3d(1, -2, 0.5);
  q.validate();
  const Pose id = q * q.inverse();
  CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(id.translation.norm() < 1e-12);
  CHECK((Pose::from_matrix(q.matrix()).matrix() - q.matrix()).norm() == 0.0);
}

TEST_CASE("bilinear sampling") {
  Tensor<double> img({1, 2, 2}, (Tensor<double>::Array(4) << 0, 1, 2, 3).finished());
  Tensor<double> grid({2, 1, 1}, (Tensor<double>::Array(2) << 0.5, 0.5).finished());
  CHECK(bilinear_sample(img, grid)[0] == doctest::Approx(1.5));

  // Integer grids reproduce pixels exactly.
  const auto x = random_tensor({3, 5, 6}, 1);
  Tensor<double> identity({2, 5, 6});
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 6; ++c) {
      identity.at({0, r, c}) = static_cast<double>(c);
      identity.at({1, r, c}) = static_cast<double>(r);
    }
  CHECK(svs::test::bit_identical(bilinear_sample(x, identity), x));

  // Outside coordinates clamp to the border.
  Tensor<double> far({2, 1, 1}, (Tensor<double>::Array(2) << 10.0, -3.0).finished());
  CHECK(bilinear_sample(img, far)[0] == doctest::Approx(1.0));
  CHECK(in_bounds_mask(far, 2, 2)[0] == 0.0);
}

TEST_CASE("stereo warp") {
  const auto x = random_tensor({3, 4, 9}, 2);
  CHECK(svs::test::bit_identical(warp_stereo(x, Tensor<double>::zeros({1, 4, 9}), StereoSide::kLeft), x));

  Tensor<double> ramp({1, 3, 20});
  for (Index i = 0; i < ramp.numel(); ++i) ramp[i] = static_cast<double>(i % 20);
  const auto left = warp_stereo(ramp, Tensor<double>::full({1, 3, 20}, 5.0), StereoSide::kLeft);
  const auto right = warp_stereo(ramp, Tensor<double>::full({1, 3, 20}, 5.0), StereoSide::kRight);
  for (Index c = 5; c < 15; ++c) {
    CHECK(left.at({0, 1, c}) == doctest::Approx(c - 5.0));
    CHECK(right.at({0, 1, c}) == doctest::Approx(c + 5.0));
  }
  const auto flipped = warp_stereo(ramp, Tensor<double>::full({1, 3, 20}, 5.0), StereoSide::kLeft,
                                   StereoConvention::kRightCameraAtNegativeX);
  CHECK(flipped.at({0, 1, 7}) == doctest::Approx(12.0));
}

TEST_CASE("stereo warp with true disparity rebuilds a generated left view") {
  const SyntheticScene scene = generate_scene(7);
  const auto& f = scene.frames[0];
  const auto rec = warp_stereo(f.right, f.disparity, StereoSide::kLeft);
  const Index h = f.left.dim(1), w = f.left.dim(2);
  double err = 0.0;
  Index n = 0;
  for (Index r = 1; r + 1 < h; ++r)
    for (Index c = 1; c + 1 < w; ++c) {
      const Index p = r * w + c;
      if (f.occluded[p] > 0 || c - f.disparity[p] < 0) continue;
      for (Index ch = 0; ch < 3; ++ch) err += std::abs(rec[ch * h * w + p] - f.left[ch * h * w + p]);
      n += 3;
    }
  CHECK(err / n * 255.0 < 1.0);
}

TEST_CASE("forward map with identity pose is the identity") {
  const auto src = random_tensor<float>({3, 8, 10}, 3, 0.0, 1.0);
  const auto depth = random_tensor<float>({1, 8, 10}, 4, 1.0, 9.0);
  const WarpedView v = forward_map(src, depth, test_camera(), Pose::identity());
  CHECK(svs::test::bit_identical(v.rgb, src));
  CHECK((v.mask.values() == 1.0f).all());
}

TEST_CASE("forward map of a fronto-parallel plane shifts by fx tx / Z") {
  const auto src = random_tensor<float>({3, 64, 64}, 5, 0.0, 1.0);
  const auto depth = Tensor<float>::full({1, 64, 64}, 2.0f);
  const WarpedView v = forward_map(src, depth, test_camera(), translation(0.1));
  for (Index r = 0; r < 64; ++r)
    for (Index c = 0; c < 64; ++c) {
      const Index p = r * 64 + c;
      if (c < 5) {
        CHECK(v.mask[p] == 0.0f);
        for (Index ch = 0; ch < 3; ++ch) CHECK(v.rgb[ch * 4096 + p] == 0.0f);
      } else {
        CHECK(v.mask[p] == 1.0f);
        for (Index ch = 0; ch < 3; ++ch) CHECK(v.rgb[ch * 4096 + p] == src[ch * 4096 + p - 5]);
      }
    }
  CHECK(v.dropped_outside == 5 * 64);
}

TEST_CASE("z-buffer keeps the nearest colliding sample") {
  // fx = 1, cx = 0: column x at depth Z lands at x + tx / Z. With tx = -1,
  // column 0 (Z=3) and column 1 (Z=1) both round to target column 0.
  CameraModel cam;
  cam.fx = cam.fy = 1.0;
  Tensor<float> src({1, 1, 3}, (Tensor<float>::Array(3) << 0.25f, 0.5f, 0.75f).finished());
  Tensor<float> depth({1, 1, 3}, (Tensor<float>::Array(3) << 3.0f, 1.0f, 1.0f).finished());
  const WarpedView v = forward_map(src, depth, cam, translation(-1.0));
  CHECK(v.rgb[0] == 0.5f);
  CHECK(v.rgb[1] == 0.75f);
  CHECK(v.mask[2] == 0.0f);

  // With the nearer sample on the left, tx = 1.5 sends columns 0 (Z=1) and
  // 1 (Z=3) both to 1.5, i.e. target column 2; column 0 wins.
  Tensor<float> swapped({1, 1, 3}, (Tensor<float>::Array(3) << 1.0f, 3.0f, 1.0f).finished());
  const WarpedView u = forward_map(src, swapped, cam, translation(1.5));
  CHECK(u.rgb[2] == 0.25f);
  CHECK(u.dropped_outside == 1);
  CHECK(u.mask[0] == 0.0f);
}

TEST_CASE("points behind the camera are dropped") {
  const auto src = Tensor<float>::ones({3, 2, 2});
  const auto depth = Tensor<float>::full({1, 2, 2}, 1.0f);
  const WarpedView v = forward_map(src, depth, test_camera(), translation(0, 0, -2.0));
  CHECK(v.dropped_behind == 4);
  CHECK(v.coverage() == 0.0);
}

TEST_CASE("forward map with true depth reproduces the target view") {
  SyntheticConfig cfg;
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticScene scene = generate_scene(seed, cfg);
    const auto& target = scene.frames[2];
    for (int r : {0, 1, 3, 4}) {
      const auto& ref = scene.frames[r];
      const WarpedView v = forward_map(ref.left, ref.depth, scene.camera, target.pose.inverse() * ref.pose);
      const Index n = v.mask.numel();
      double err = 0.0, count = 0.0;
      for (Index p = 0; p < n; ++p) {
        if (v.mask[p] == 0.0f) continue;
        for (Index c = 0; c < 3; ++c) err += std::abs(v.rgb[c * n + p] - target.left[c * n + p]);
        count += 3;
      }
      CHECK(err / count * 255.0 < 2.0);
    }
  }
}

TEST_CASE("reference set warps views independently") {
  const SyntheticScene scene = generate_scene(4);
  std::vector<Tensor<float>> views, depths;
  std::vector<Pose> poses;
  for (int r : {1, 3, 0, 4}) {
    views.push_back(scene.frames[r].left);
    depths.push_back(scene.frames[r].depth);
    poses.push_back(scene.frames[2].pose.inverse() * scene.frames[r].pose);
  }
  const std::vector<CameraModel> cams(4, scene.camera);
  const auto warped = warp_reference_set(views, depths, cams, poses);
  REQUIRE(warped.size() == 4);
  Tensor<float> uni = Tensor<float>::zeros(warped[0].mask.shape());
  for (std::size_t i = 0; i < 4; ++i) {
    const auto alone = forward_map(views[i], depths[i], scene.camera, poses[i]);
    CHECK(svs::test::bit_identical(alone.rgb, warped[i].rgb));
    uni.values() = uni.values().max(warped[i].mask.values());
  }
  CHECK(uni.values().mean() >= warped[0].coverage());

  const auto single = warp_reference_set({views[0]}, {depths[0]}, {scene.camera}, {Pose::identity()});
  CHECK(svs::test::bit_identical(single[0].rgb, views[0]));
  CHECK_THROWS(warp_reference_set(views, depths, cams, {}));
}
