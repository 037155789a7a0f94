#include "svs/kitti.hpp"

#include "svs/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace svs {

namespace fs = std::filesystem;

namespace {

std::string where(const fs::path& path, int line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::vector<double> parse_numbers(const std::string& text, const fs::path& path, int line) {
  std::istringstream in(text);
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || !std::isfinite(v)) {
      throw DatasetError(where(path, line) + "expected a number, found '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

Eigen::Matrix<double, 3, 4> to_matrix(const std::vector<double>& v) {
  Eigen::Matrix<double, 3, 4> m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[4 * r + c];
  return m;
}

std::string format_matrix(const Eigen::Matrix<double, 3, 4>& m) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out << (r || c ? " " : "") << m(r, c);
  return out.str();
}

std::string frame_name(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d.png", frame);
  return buf;
}

}  // namespace

CameraModel StereoCalibration::camera() const {
  CameraModel cam;
  cam.fx = p2(0, 0);
  cam.fy = p2(1, 1);
  cam.cx = p2(0, 2);
  cam.cy = p2(1, 2);
  if (!(cam.fx > 0)) throw DatasetError("calibration: P2 focal length is not positive");
  cam.baseline = (p2(0, 3) - p3(0, 3)) / cam.fx;
  if (!(cam.baseline > 0)) {
    throw DatasetError("calibration: P2/P3 offsets give a non-positive stereo baseline");
  }
  return cam;
}

StereoCalibration StereoCalibration::from_camera(const CameraModel& cam) {
  StereoCalibration c;
  c.p2 << cam.fx, 0, cam.cx, 0, 0, cam.fy, cam.cy, 0, 0, 0, 1, 0;
  c.p3 = c.p2;
  c.p3(0, 3) = -cam.fx * cam.baseline;
  return c;
}

StereoCalibration parse_calibration(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open calibration file: " + path.string());
  StereoCalibration calib;
  bool have2 = false, have3 = false;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto colon = text.find(':');
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (colon == std::string::npos) {
      throw DatasetError(where(path, line) + "expected 'KEY: values'");
    }
    const std::string key = text.substr(0, colon);
    if (key != "P2" && key != "P3") continue;
    const auto v = parse_numbers(text.substr(colon + 1), path, line);
    if (v.size() != 12) {
      throw DatasetError(where(path, line) + key + " needs 12 values, found " +
                         std::to_string(v.size()));
    }
    (key == "P2" ? calib.p2 : calib.p3) = to_matrix(v);
    (key == "P2" ? have2 : have3) = true;
  }
  if (!have2 || !have3) {
    throw DatasetError(path.string() + ": missing " + std::string(have2 ? "P3" : "P2") + " line");
  }
  return calib;
}

std::vector<Pose> parse_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open pose file: " + path.string());
  std::vector<Pose> poses;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto v = parse_numbers(text, path, line);
    if (v.size() != 12) {
      throw DatasetError(where(path, line) + "pose needs 12 values, found " +
                         std::to_string(v.size()));
    }
    Pose p = Pose::from_matrix(to_matrix(v));
    try {
      p.validate(1e-4);
    } catch (const std::invalid_argument& e) {
      throw DatasetError(where(path, line) + e.what());
    }
    poses.push_back(p);
  }
  return poses;
}

void write_calibration(const fs::path& path, const StereoCalibration& calib) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write calibration file: " + path.string());
  out << "P0: " << format_matrix(calib.p2) << "\n";
  out << "P1: " << format_matrix(calib.p3) << "\n";
  out << "P2: " << format_matrix(calib.p2) << "\n";
  out << "P3: " << format_matrix(calib.p3) << "\n";
}

void write_poses(const fs::path& path, const std::vector<Pose>& poses) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write pose file: " + path.string());
  for (const auto& p : poses) out << format_matrix(p.matrix()) << "\n";
}

// ---------------------------------------------------------------------------

KittiSequence::KittiSequence(fs::path root, std::string sequence, CropSpec crop)
    : root_(std::move(root)), sequence_(std::move(sequence)), crop_(crop) {
  const fs::path seq_dir = root_ / "sequences" / sequence_;
  if (!fs::is_directory(seq_dir)) throw DatasetError("missing sequence directory: " + seq_dir.string());
  for (const char* sub : {"image_2", "image_3"}) {
    if (!fs::is_directory(seq_dir / sub)) {
      throw DatasetError("missing image directory: " + (seq_dir / sub).string());
    }
  }
  calib_ = parse_calibration(seq_dir / "calib.txt");
  camera_ = calib_.camera();
  poses_ = parse_poses(root_ / "poses" / (sequence_ + ".txt"));
  if (poses_.empty()) throw DatasetError("pose file lists no frames for sequence " + sequence_);
  if (!fs::exists(left_path(0))) throw DatasetError("missing image: " + left_path(0).string());

  const Tensor<float> first = read_png(left_path(0));
  full_height_ = first.dim(1);
  full_width_ = first.dim(2);
  if (crop_.height > full_height_ || crop_.width > full_width_) {
    throw DatasetError("crop " + std::to_string(crop_.height) + "x" + std::to_string(crop_.width) +
                       " exceeds image size " + std::to_string(full_height_) + "x" +
                       std::to_string(full_width_));
  }
  if (crop_.height > 0) camera_.cy -= static_cast<double>((full_height_ - crop_.height) / 2);
  if (crop_.width > 0) camera_.cx -= static_cast<double>((full_width_ - crop_.width) / 2);
}

fs::path KittiSequence::left_path(int frame) const {
  return root_ / "sequences" / sequence_ / "image_2" / frame_name(frame);
}
fs::path KittiSequence::right_path(int frame) const {
  return root_ / "sequences" / sequence_ / "image_3" / frame_name(frame);
}
fs::path KittiSequence::depth_path(int frame) const {
  return root_ / "sequences" / sequence_ / "depth_2" / frame_name(frame);
}

void KittiSequence::check_frame(int frame) const {
  if (frame < 0 || frame >= size()) {
    throw DatasetError("frame " + std::to_string(frame) + " out of range for sequence " +
                       sequence_ + " with " + std::to_string(size()) + " frames");
  }
}

Tensor<float> KittiSequence::crop(const Tensor<float>& image) const {
  const Index h = image.dim(1), w = image.dim(2);
  if (h != full_height_ || w != full_width_) {
    throw DatasetError("sequence " + sequence_ + ": frame size " + std::to_string(h) + "x" +
                       std::to_string(w) + " differs from the first frame");
  }
  const Index ch = crop_.height > 0 ? crop_.height : h, cw = crop_.width > 0 ? crop_.width : w;
  if (ch == h && cw == w) return image;
  return narrow(narrow(image, 1, (h - ch) / 2, ch), 2, (w - cw) / 2, cw).detach();
}

Tensor<float> KittiSequence::left(int frame) const {
  check_frame(frame);
  return crop(read_png(left_path(frame)));
}

Tensor<float> KittiSequence::right(int frame) const {
  check_frame(frame);
  return crop(read_png(right_path(frame)));
}

bool KittiSequence::has_depth() const { return fs::exists(depth_path(0)); }

Tensor<float> KittiSequence::depth(int frame) const {
  check_frame(frame);
  if (!fs::exists(depth_path(frame))) {
    throw DatasetError("missing depth map: " + depth_path(frame).string());
  }
  return crop(read_depth_png(depth_path(frame)));
}

KittiSequence load_kitti_sequence(const fs::path& root, const std::string& sequence,
                                  CropSpec crop) {
  return KittiSequence(root, sequence, crop);
}

// ---------------------------------------------------------------------------

std::vector<int> eligible_targets(int sequence_length, int spacing) {
  std::vector<int> out;
  const int reach = 2 * spacing;
  for (int t = reach; t + reach < sequence_length; ++t) out.push_back(t);
  return out;
}

SequenceSample sample_window(int sequence_length, const std::vector<Pose>& poses, int target,
                             int spacing) {
  if (spacing < 0) throw std::invalid_argument("window spacing must be >= 0");
  if (static_cast<int>(poses.size()) < sequence_length) {
    throw std::invalid_argument("window: fewer poses than frames");
  }
  SequenceSample s;
  s.target = target;
  s.spacing = spacing;
  s.offsets = spacing == 0 ? std::vector<int>{0}
                           : std::vector<int>{-spacing, spacing, -2 * spacing, 2 * spacing};
  for (int off : s.offsets) {
    const int f = target + off;
    if (f < 0 || f >= sequence_length) {
      throw std::out_of_range("window around frame " + std::to_string(target) + " with spacing " +
                              std::to_string(spacing) + " leaves the sequence (0.." +
                              std::to_string(sequence_length - 1) + ")");
    }
    s.references.push_back(f);
    s.reference_to_target.push_back(poses[target].inverse() * poses[f]);
  }
  return s;
}

SequenceSample sample_window(const KittiSequence& seq, int target, int spacing) {
  return sample_window(seq.size(), seq.poses(), target, spacing);
}

void write_kitti_sequence(const fs::path& root, const std::string& sequence,
                          const CameraModel& cam, const std::vector<ExportFrame>& frames) {
  const fs::path seq_dir = root / "sequences" / sequence;
  fs::create_directories(seq_dir / "image_2");
  fs::create_directories(seq_dir / "image_3");
  write_calibration(seq_dir / "calib.txt", StereoCalibration::from_camera(cam));
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto name = frame_name(static_cast<int>(i));
    write_png(seq_dir / "image_2" / name, frames[i].left);
    write_png(seq_dir / "image_3" / name, frames[i].right);
    if (frames[i].depth.defined()) write_depth_png(seq_dir / "depth_2" / name, frames[i].depth);
    poses.push_back(frames[i].pose);
  }
  write_poses(root / "poses" / (sequence + ".txt"), poses);
}

}  // namespace svs
