#include "svs/synthetic.hpp"

#include "svs/image_io.hpp"

#include <cmath>
#include <random>

namespace svs {

void SyntheticConfig::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("synthetic: image size must be positive");
  if (!(focal > 0) || !(baseline > 0)) {
    throw std::invalid_argument("synthetic: focal length and baseline must be positive");
  }
  if (min_planes < 1) {
    throw std::invalid_argument("synthetic: a scene needs at least one plane, got min_planes = " +
                                std::to_string(min_planes));
  }
  if (max_planes < min_planes) throw std::invalid_argument("synthetic: max_planes < min_planes");
  if (!(background_depth_min > 0) || background_depth_max < background_depth_min ||
      !(foreground_depth_min > 0) || foreground_depth_max < foreground_depth_min) {
    throw std::invalid_argument("synthetic: depth ranges must be positive and ordered");
  }
  if (!(card_size_min > 0) || card_size_max < card_size_min) {
    throw std::invalid_argument("synthetic: invalid card size range");
  }
  if (!(texture_cell > 0) || texture_octaves < 1 || texture_amplitude < 0) {
    throw std::invalid_argument("synthetic: invalid texture parameters");
  }
  if (base_color_min < 0 || base_color_max > 1 || base_color_max < base_color_min) {
    throw std::invalid_argument("synthetic: base colour range must lie in [0,1]");
  }
  if (frames < 1) throw std::invalid_argument("synthetic: need at least one frame");
  if (track_direction.norm() == 0 && frames > 1 && frame_spacing != 0) {
    throw std::invalid_argument("synthetic: track direction must be non-zero");
  }
}

CameraModel SyntheticConfig::camera() const {
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * static_cast<double>(width - 1);
  cam.cy = 0.5 * static_cast<double>(height - 1);
  cam.baseline = baseline;
  return cam;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h =
      mix(seed ^ mix(static_cast<std::uint64_t>(ix) ^ mix(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = fade(x - fx), ty = fade(y - fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
}

}  // namespace

Eigen::Vector3d plane_color(const TexturedPlane& plane, double x, double y) {
  Eigen::Vector3d c = plane.base_color;
  for (int ch = 0; ch < 3; ++ch) {
    double cell = plane.cell, weight = plane.amplitude;
    for (int o = 0; o < plane.octaves; ++o) {
      const std::uint64_t s = mix(plane.texture_seed + 97 * static_cast<std::uint64_t>(ch) +
                                  7919 * static_cast<std::uint64_t>(o));
      c[ch] += weight * value_noise(s, x / cell, y / cell);
      cell *= 0.5;
      weight *= 0.5;
    }
  }
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

RayHit cast_ray(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                const Eigen::Vector3d& centre, double u, double v) {
  RayHit best;
  const double rx = (u - cam.cx) / cam.fx, ry = (v - cam.cy) / cam.fy;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const auto& p = planes[k];
    const double z = p.depth - centre.z();
    if (!(z > 0)) continue;
    if (best.plane >= 0 && !(z < best.depth)) continue;
    const double x = centre.x() + rx * z, y = centre.y() + ry * z;
    if (!p.unbounded && (x < p.x_min || x > p.x_max || y < p.y_min || y > p.y_max)) continue;
    best.plane = static_cast<int>(k);
    best.depth = z;
  }
  return best;
}

void render_view(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                 const Eigen::Vector3d& centre, Index height, Index width, Tensor<float>& rgb,
                 Tensor<float>& depth) {
  const Index plane = height * width;
  rgb = Tensor<float>({3, height, width});
  depth = Tensor<float>({1, height, width});
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const RayHit hit = cast_ray(planes, cam, centre, static_cast<double>(x), static_cast<double>(y));
      if (hit.plane < 0) throw std::logic_error("synthetic: ray missed every plane");
      const double wx = centre.x() + (static_cast<double>(x) - cam.cx) / cam.fx * hit.depth;
      const double wy = centre.y() + (static_cast<double>(y) - cam.cy) / cam.fy * hit.depth;
      const Eigen::Vector3d c = plane_color(planes[hit.plane], wx, wy);
      for (int ch = 0; ch < 3; ++ch) rgb[ch * plane + y * width + x] = static_cast<float>(c[ch]);
      depth[y * width + x] = static_cast<float>(hit.depth);
    }
}

Tensor<float> visibility_mask(const std::vector<TexturedPlane>& planes, const CameraModel& cam,
                              const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                              Index height, Index width) {
  Tensor<float> mask({1, height, width});
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const RayHit hit = cast_ray(planes, cam, from, static_cast<double>(x), static_cast<double>(y));
      if (hit.plane < 0) continue;
      const Eigen::Vector3d p =
          from + Eigen::Vector3d((static_cast<double>(x) - cam.cx) / cam.fx * hit.depth,
                                 (static_cast<double>(y) - cam.cy) / cam.fy * hit.depth, hit.depth);
      const Eigen::Vector3d q = p - to;
      if (!(q.z() > 0)) continue;
      const double u = cam.fx * q.x() / q.z() + cam.cx, v = cam.fy * q.y() / q.z() + cam.cy;
      if (u < 0 || v < 0 || u > static_cast<double>(width - 1) || v > static_cast<double>(height - 1)) {
        continue;
      }
      const RayHit seen = cast_ray(planes, cam, to, u, v);
      if (seen.plane == hit.plane) mask[y * width + x] = 1.0f;
    }
  return mask;
}

SyntheticScene generate_scene(std::uint64_t seed, const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticScene scene;
  scene.seed = seed;
  scene.config = cfg;
  scene.camera = cfg.camera();
  const CameraModel& cam = scene.camera;

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto make_texture = [&](TexturedPlane& p, double viewing_depth) {
    for (int ch = 0; ch < 3; ++ch) p.base_color[ch] = uniform(cfg.base_color_min, cfg.base_color_max);
    p.cell = cfg.texture_cell * viewing_depth / cam.fx;
    p.octaves = cfg.texture_octaves;
    p.amplitude = cfg.texture_amplitude;
    p.texture_seed = rng();
  };


  // Depths and card positions are drawn relative to the middle frame of the
  // track; cards must stay inside every frame of both cameras.
  const Eigen::Vector3d dir =
      cfg.track_direction.norm() > 0 ? cfg.track_direction.normalized() : Eigen::Vector3d::UnitX();
  const int mid = (cfg.frames - 1) / 2;
  const Eigen::Vector3d mid_centre = dir * (cfg.frame_spacing * mid);
  const Eigen::Vector3d stereo(cam.baseline, 0, 0);
  const double w = static_cast<double>(cfg.width), h = static_cast<double>(cfg.height);
  auto fits = [&](const TexturedPlane& card) {
    for (int f = 0; f < cfg.frames; ++f)
      for (const Eigen::Vector3d& c : {Eigen::Vector3d(dir * (cfg.frame_spacing * f)),
                                       Eigen::Vector3d(dir * (cfg.frame_spacing * f) + stereo)}) {
        const double z = card.depth - c.z();
        if (!(z > 0)) return false;
        const double u0 = cam.fx * (card.x_min - c.x()) / z + cam.cx;
        const double u1 = cam.fx * (card.x_max - c.x()) / z + cam.cx;
        const double v0 = cam.fy * (card.y_min - c.y()) / z + cam.cy;
        const double v1 = cam.fy * (card.y_max - c.y()) / z + cam.cy;
        if (u0 < 1 || v0 < 1 || u1 > w - 2 || v1 > h - 2) return false;
      }
    return true;
  };
  TexturedPlane background;
  background.depth = mid_centre.z() + uniform(cfg.background_depth_min, cfg.background_depth_max);
  background.unbounded = true;
  make_texture(background, background.depth - mid_centre.z());
  scene.planes.push_back(background);

  const int cards = std::uniform_int_distribution<int>(cfg.min_planes, cfg.max_planes)(rng) - 1;
  for (int i = 0; i < cards; ++i) {
    TexturedPlane card;
    card.depth = mid_centre.z() + uniform(cfg.foreground_depth_min, cfg.foreground_depth_max);
    const double z = card.depth - mid_centre.z();
    double shrink = 1.0;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      if (attempt > 0 && attempt % 25 == 0) shrink *= 0.8;
      const double sx = shrink * uniform(cfg.card_size_min, cfg.card_size_max) * w;
      const double sy = shrink * uniform(cfg.card_size_min, cfg.card_size_max) * w;
      const double px = uniform(0.2 * w, 0.8 * w), py = uniform(0.2 * h, 0.8 * h);
      const double cx = mid_centre.x() + (px - cam.cx) / cam.fx * z;
      const double cy = mid_centre.y() + (py - cam.cy) / cam.fy * z;
      const double hx = 0.5 * sx * z / cam.fx, hy = 0.5 * sy * z / cam.fy;
      card.x_min = cx - hx;
      card.x_max = cx + hx;
      card.y_min = cy - hy;
      card.y_max = cy + hy;
      placed = fits(card);
    }
    if (!placed) continue;
    make_texture(card, z);
    scene.planes.push_back(card);
  }

  const double fb = cam.fx * cam.baseline;
  for (int f = 0; f < cfg.frames; ++f) {
    SyntheticFrame frame;
    const Eigen::Vector3d centre = dir * (cfg.frame_spacing * f);
    frame.pose.translation = centre;
    Tensor<float> rgb_l, rgb_r, depth_r;
    render_view(scene.planes, cam, centre, cfg.height, cfg.width, rgb_l, frame.depth);
    render_view(scene.planes, cam, centre + stereo, cfg.height, cfg.width, rgb_r, depth_r);
    frame.left = quantize_8bit(rgb_l);
    frame.right = quantize_8bit(rgb_r);
    frame.disparity = Tensor<float>(frame.depth.shape());
    frame.disparity_right = Tensor<float>(depth_r.shape());
    for (Index p = 0; p < frame.depth.numel(); ++p) {
      frame.disparity[p] = static_cast<float>(fb / frame.depth[p]);
      frame.disparity_right[p] = static_cast<float>(fb / depth_r[p]);
    }
    auto visible = visibility_mask(scene.planes, cam, centre, centre + stereo, cfg.height, cfg.width);
    frame.occluded = Tensor<float>(visible.shape());
    frame.occluded.values() = 1.0f - visible.values();
    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

}  // namespace svs
