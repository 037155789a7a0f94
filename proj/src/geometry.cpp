#include "svs/geometry.hpp"

#include <cmath>
#include <limits>

namespace svs {

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (!(baseline > 0)) throw std::invalid_argument("stereo baseline must be positive");
}

Eigen::Matrix3d CameraModel::intrinsics() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Pose Pose::from_matrix(const Eigen::Matrix<double, 3, 4>& m) {
  Pose p;
  p.rotation = m.leftCols<3>();
  p.translation = m.col(3);
  return p;
}

Eigen::Matrix<double, 3, 4> Pose::matrix() const {
  Eigen::Matrix<double, 3, 4> m;
  m << rotation, translation;
  return m;
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation = rotation.transpose();
  p.translation = -(p.rotation * translation);
  return p;
}

Pose Pose::operator*(const Pose& other) const {
  Pose p;
  p.rotation = rotation * other.rotation;
  p.translation = rotation * other.translation + translation;
  return p;
}

void Pose::validate(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) throw std::invalid_argument("pose rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol) {
    throw std::invalid_argument("pose rotation determinant is not +1");
  }
}

DepthConversion disparity_to_depth(const Tensor<float>& disparity, const CameraModel& cam,
                                   double min_disparity) {
  cam.validate();
  if (!(min_disparity > 0)) throw std::invalid_argument("disparity floor must be positive");
  DepthConversion out{Tensor<float>(disparity.shape()), 0};
  const double fb = cam.fx * cam.baseline;
  for (Index i = 0; i < disparity.numel(); ++i) {
    double d = disparity[i];
    if (!(d >= min_disparity)) {
      d = min_disparity;
      ++out.clamped;
    }
    out.depth[i] = static_cast<float>(fb / d);
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& img, const Tensor<T>& grid) {
  if (img.rank() != 3 || grid.rank() != 3 || grid.dim(0) != 2) {
    throw ShapeError("bilinear_sample: expected img [C,H,W] and grid [2,H',W'], got " +
                     to_string(img.shape()) + " and " + to_string(grid.shape()));
  }
  const Index c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const Index oh = grid.dim(1), ow = grid.dim(2), npix = oh * ow;
  const T* gx = grid.data();
  const T* gy = grid.data() + npix;
  const T* src = img.data();

  typename Tensor<T>::Array out(c * npix);
  for (Index p = 0; p < npix; ++p) {
    const T xc = std::clamp(gx[p], T(0), static_cast<T>(w - 1));
    const T yc = std::clamp(gy[p], T(0), static_cast<T>(h - 1));
    const Index x0 = static_cast<Index>(std::floor(xc)), y0 = static_cast<Index>(std::floor(yc));
    const Index x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const T wx = xc - static_cast<T>(x0), wy = yc - static_cast<T>(y0);
    for (Index ch = 0; ch < c; ++ch) {
      const T* plane = src + ch * h * w;
      const T top = (T(1) - wx) * plane[y0 * w + x0] + wx * plane[y0 * w + x1];
      const T bot = (T(1) - wx) * plane[y1 * w + x0] + wx * plane[y1 * w + x1];
      out[ch * npix + p] = (T(1) - wy) * top + wy * bot;
    }
  }

  return Tensor<T>::make_result(
      Shape{c, oh, ow}, std::move(out), {img, grid}, [img, grid, c, h, w, npix](const auto& g) {
        auto* si = img.grad_sink();
        auto* sg = grid.grad_sink();
        const T* gx = grid.data();
        const T* gy = grid.data() + npix;
        const T* src = img.data();
        for (Index p = 0; p < npix; ++p) {
          const T xc = std::clamp(gx[p], T(0), static_cast<T>(w - 1));
          const T yc = std::clamp(gy[p], T(0), static_cast<T>(h - 1));
          const Index x0 = static_cast<Index>(std::floor(xc)), y0 = static_cast<Index>(std::floor(yc));
          const Index x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
          const T wx = xc - static_cast<T>(x0), wy = yc - static_cast<T>(y0);
          T dwx = 0, dwy = 0;
          for (Index ch = 0; ch < c; ++ch) {
            const T go = g[ch * npix + p];
            if (si) {
              T* plane = si->data() + ch * h * w;
              plane[y0 * w + x0] += go * (T(1) - wx) * (T(1) - wy);
              plane[y0 * w + x1] += go * wx * (T(1) - wy);
              plane[y1 * w + x0] += go * (T(1) - wx) * wy;
              plane[y1 * w + x1] += go * wx * wy;
            }
            if (sg) {
              const T* plane = src + ch * h * w;
              const T i00 = plane[y0 * w + x0], i01 = plane[y0 * w + x1];
              const T i10 = plane[y1 * w + x0], i11 = plane[y1 * w + x1];
              dwx += go * ((T(1) - wy) * (i01 - i00) + wy * (i11 - i10));
              dwy += go * ((T(1) - wx) * (i10 - i00) + wx * (i11 - i01));
            }
          }
          if (sg) {
            // Clamped coordinates do not move the sample.
            if (gx[p] > T(0) && gx[p] < static_cast<T>(w - 1)) (*sg)[p] += dwx;
            if (gy[p] > T(0) && gy[p] < static_cast<T>(h - 1)) (*sg)[npix + p] += dwy;
          }
        }
      });
}

template <typename T>
Tensor<T> in_bounds_mask(const Tensor<T>& grid, Index height, Index width) {
  const Index npix = grid.dim(1) * grid.dim(2);
  Tensor<T> mask({1, grid.dim(1), grid.dim(2)});
  for (Index p = 0; p < npix; ++p) {
    const T x = grid[p], y = grid[npix + p];
    const bool inside = x >= T(0) && x <= static_cast<T>(width - 1) && y >= T(0) &&
                        y <= static_cast<T>(height - 1);
    mask[p] = inside ? T(1) : T(0);
  }
  return mask;
}

template <typename T>
Tensor<T> stereo_grid(const Tensor<T>& disparity, StereoSide side, StereoConvention convention) {
  if (disparity.rank() != 3 || disparity.dim(0) != 1) {
    throw ShapeError("stereo_grid: disparity must be [1,H,W], got " + to_string(disparity.shape()));
  }
  const Index h = disparity.dim(1), w = disparity.dim(2);
  Tensor<T> base_x({1, h, w}), base_y({1, h, w});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      base_x[y * w + x] = static_cast<T>(x);
      base_y[y * w + x] = static_cast<T>(y);
    }
  bool minus = side == StereoSide::kLeft;
  if (convention == StereoConvention::kRightCameraAtNegativeX) minus = !minus;
  auto gx = minus ? base_x - disparity : base_x + disparity;
  return concat<T>({gx, base_y}, 0);
}

template <typename T>
Tensor<T> warp_stereo(const Tensor<T>& other, const Tensor<T>& disparity, StereoSide side,
                      StereoConvention convention) {
  if (other.rank() != 3 || other.dim(1) != disparity.dim(1) || other.dim(2) != disparity.dim(2)) {
    throw ShapeError("warp_stereo: image " + to_string(other.shape()) +
                     " does not match disparity " + to_string(disparity.shape()));
  }
  return bilinear_sample(other, stereo_grid(disparity, side, convention));
}

// ---------------------------------------------------------------------------

WarpedView forward_map(const Tensor<float>& src, const Tensor<float>& depth,
                       const CameraModel& cam, const Pose& source_to_target) {
  cam.validate();
  if (src.rank() != 3) throw ShapeError("forward_map: source must be [C,H,W]");
  const Index c = src.dim(0), h = src.dim(1), w = src.dim(2), npix = h * w;
  if (depth.numel() != npix) {
    throw ShapeError("forward_map: depth " + to_string(depth.shape()) + " does not match image " +
                     to_string(src.shape()));
  }

  WarpedView out{Tensor<float>({c, h, w}), Tensor<float>({1, h, w}), 0, 0};
  std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());
  std::vector<double> centre_offset(npix, 0.0);
  std::vector<Index> origin(npix, -1);
  const Eigen::Matrix3d& r = source_to_target.rotation;
  const Eigen::Vector3d& t = source_to_target.translation;

  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      const double z = depth[y * w + x];
      if (!(z > 0)) {
        ++out.dropped_behind;
        continue;
      }
      const Eigen::Vector3d ray((static_cast<double>(x) - cam.cx) / cam.fx,
                                (static_cast<double>(y) - cam.cy) / cam.fy, 1.0);
      const Eigen::Vector3d p = r * (ray * z) + t;
      if (!(p.z() > 0)) {
        ++out.dropped_behind;
        continue;
      }
      const double u = cam.fx * p.x() / p.z() + cam.cx;
      const double v = cam.fy * p.y() / p.z() + cam.cy;
      const double tx = std::floor(u + 0.5), ty = std::floor(v + 0.5);
      if (tx < 0 || ty < 0 || tx >= static_cast<double>(w) || ty >= static_cast<double>(h)) {
        ++out.dropped_outside;
        continue;
      }
      const Index target = static_cast<Index>(ty) * w + static_cast<Index>(tx);
      const double offset = std::abs(u - tx) + std::abs(v - ty);
      // Equal depths (one plane seen under minification) keep the sample
      // landing closest to the pixel centre.
      if (p.z() < zbuf[target] || (p.z() == zbuf[target] && offset < centre_offset[target])) {
        zbuf[target] = p.z();
        centre_offset[target] = offset;
        origin[target] = y * w + x;
      }
    }

  for (Index p = 0; p < npix; ++p) {
    if (origin[p] < 0) continue;
    out.mask[p] = 1.0f;
    for (Index ch = 0; ch < c; ++ch) out.rgb[ch * npix + p] = src[ch * npix + origin[p]];
  }
  return out;
}

std::vector<WarpedView> warp_reference_set(const std::vector<Tensor<float>>& views,
                                           const std::vector<Tensor<float>>& depths,
                                           const std::vector<CameraModel>& cams,
                                           const std::vector<Pose>& poses) {
  if (views.empty()) throw std::invalid_argument("warp_reference_set: need at least one view");
  if (depths.size() != views.size() || cams.size() != views.size() || poses.size() != views.size()) {
    throw std::invalid_argument("warp_reference_set: views, depths, cameras and poses differ in count");
  }
  std::vector<WarpedView> out;
  out.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    out.push_back(forward_map(views[i], depths[i], cams[i], poses[i]));
  }
  return out;
}

#define SVS_INSTANTIATE_GEOM(T)                                                        \
  template Tensor<T> bilinear_sample(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> in_bounds_mask(const Tensor<T>&, Index, Index);                   \
  template Tensor<T> stereo_grid(const Tensor<T>&, StereoSide, StereoConvention);      \
  template Tensor<T> warp_stereo(const Tensor<T>&, const Tensor<T>&, StereoSide,       \
                                 StereoConvention);

SVS_INSTANTIATE_GEOM(float)
SVS_INSTANTIATE_GEOM(double)

}  // namespace svs
