#include "svs/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace svs {

using nlohmann::json;

namespace {

template <typename E>
using Names = std::vector<std::pair<E, const char*>>;

const Names<Stage> kStages{{Stage::kDepth, "depth"}, {Stage::kInpaint, "inpaint"}};
const Names<BlockOrder> kOrders{{BlockOrder::kReluThenNorm, "relu_bn"},
                                {BlockOrder::kNormThenRelu, "bn_relu"}};
const Names<StereoConvention> kConventions{
    {StereoConvention::kRightCameraAtPositiveX, "right_at_positive_x"},
    {StereoConvention::kRightCameraAtNegativeX, "right_at_negative_x"}};
const Names<InpaintBlockKind> kBlocks{{InpaintBlockKind::kResidual, "residual"},
                                      {InpaintBlockKind::kConv, "conv"}};
const Names<OutputActivation> kOutputs{{OutputActivation::kClampLinear, "clamp"},
                                       {OutputActivation::kSigmoid, "sigmoid"}};
const Names<DatasetKind> kKinds{{DatasetKind::kSynthetic, "synthetic"},
                                {DatasetKind::kKitti, "kitti"}};

template <typename E>
const char* name_of(const Names<E>& names, E value) {
  for (const auto& [v, n] : names)
    if (v == value) return n;
  return "?";
}

// Reads the keys of one JSON object into fields and rejects keys nobody read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, const Names<E>& names) {
    std::string text;
    if (!j_.contains(key)) return;
    get(key, text);
    for (const auto& [v, n] : names) {
      if (text == n) {
        out = v;
        return;
      }
    }
    std::string options;
    for (const auto& [v, n] : names) options += std::string(options.empty() ? "" : ", ") + n;
    throw ConfigError(path_ + "." + key + ": unknown value '" + text + "' (expected " + options + ")");
  }

  template <typename F>
  void object(const char* key, F&& read) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Reader sub(j_.at(key), path_ + "." + key);
    read(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_vector(Reader& r, const char* key, Eigen::Vector3d& v) {
  std::vector<double> xs;
  r.get(key, xs);
  if (xs.empty()) return;
  if (xs.size() != 3) throw ConfigError(std::string(key) + ": expected 3 numbers");
  v = Eigen::Vector3d(xs[0], xs[1], xs[2]);
}

void read_synthetic(Reader& r, SyntheticConfig& s) {
  r.get("width", s.width);
  r.get("height", s.height);
  r.get("focal", s.focal);
  r.get("baseline", s.baseline);
  r.get("min_planes", s.min_planes);
  r.get("max_planes", s.max_planes);
  r.get("background_depth_min", s.background_depth_min);
  r.get("background_depth_max", s.background_depth_max);
  r.get("foreground_depth_min", s.foreground_depth_min);
  r.get("foreground_depth_max", s.foreground_depth_max);
  r.get("card_size_min", s.card_size_min);
  r.get("card_size_max", s.card_size_max);
  r.get("texture_cell", s.texture_cell);
  r.get("texture_octaves", s.texture_octaves);
  r.get("texture_amplitude", s.texture_amplitude);
  r.get("base_color_min", s.base_color_min);
  r.get("base_color_max", s.base_color_max);
  r.get("frames", s.frames);
  r.get("frame_spacing", s.frame_spacing);
  read_vector(r, "track_direction", s.track_direction);
}

json synthetic_json(const SyntheticConfig& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"focal", s.focal},
          {"baseline", s.baseline},
          {"min_planes", s.min_planes},
          {"max_planes", s.max_planes},
          {"background_depth_min", s.background_depth_min},
          {"background_depth_max", s.background_depth_max},
          {"foreground_depth_min", s.foreground_depth_min},
          {"foreground_depth_max", s.foreground_depth_max},
          {"card_size_min", s.card_size_min},
          {"card_size_max", s.card_size_max},
          {"texture_cell", s.texture_cell},
          {"texture_octaves", s.texture_octaves},
          {"texture_amplitude", s.texture_amplitude},
          {"base_color_min", s.base_color_min},
          {"base_color_max", s.base_color_max},
          {"frames", s.frames},
          {"frame_spacing", s.frame_spacing},
          {"track_direction",
           {s.track_direction.x(), s.track_direction.y(), s.track_direction.z()}}};
}

}  // namespace

std::string to_string(Stage stage) { return name_of(kStages, stage); }

RunConfig RunConfig::defaults(Stage stage) {
  RunConfig cfg;
  cfg.stage = stage;
  cfg.iterations = stage == Stage::kDepth ? 200000 : 1000000;
  return cfg;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (iterations <= 0) fail("iterations must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (log_every <= 0) fail("log_every must be positive");
  if (!(optimizer.lr > 0) || !(optimizer.eps > 0)) fail("optimizer: lr and eps must be positive");
  if (optimizer.beta1 < 0 || optimizer.beta1 >= 1 || optimizer.beta2 < 0 || optimizer.beta2 >= 1) {
    fail("optimizer: betas must lie in [0, 1)");
  }
  if (optimizer.grad_clip < 0) fail("optimizer: grad_clip must be >= 0");
  if (inpaint.spacing < 0) fail("inpaint.spacing must be >= 0");
  if (!(inpaint.min_disparity > 0)) fail("inpaint.min_disparity must be positive");
  if (data.kind == DatasetKind::kSynthetic && data.scenes <= 0) fail("data.scenes must be positive");
  if (data.kind == DatasetKind::kKitti && (data.root.empty() || data.sequences.empty())) {
    fail("data: KITTI data needs a root and at least one sequence");
  }
  try {
    loss.validate();
    depth_net.validate();
    inpaint_net.validate();
    if (data.kind == DatasetKind::kSynthetic) data.synthetic.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");

  Stage stage = Stage::kDepth;
  if (j.contains("stage")) {
    const json only_stage = {{"stage", j["stage"]}};
    Reader probe(only_stage, origin);
    probe.get_enum("stage", stage, kStages);
  }
  RunConfig cfg = RunConfig::defaults(stage);

  Reader r(j, origin);
  r.get_enum("stage", cfg.stage, kStages);
  r.get("iterations", cfg.iterations);
  r.get("batch_size", cfg.batch_size);
  r.get("seed", cfg.seed);
  r.get("output_dir", cfg.output_dir);
  r.get("checkpoint_every", cfg.checkpoint_every);
  r.get("log_every", cfg.log_every);
  r.get("resume", cfg.resume);
  r.object("optimizer", [&](Reader& o) {
    o.get("lr", cfg.optimizer.lr);
    o.get("beta1", cfg.optimizer.beta1);
    o.get("beta2", cfg.optimizer.beta2);
    o.get("eps", cfg.optimizer.eps);
    o.get("grad_clip", cfg.optimizer.grad_clip);
  });
  r.object("loss", [&](Reader& o) {
    o.get("lambda0", cfg.loss.lambda0);
    o.get("lambda1", cfg.loss.lambda1);
    o.get("lambda2", cfg.loss.lambda2);
    o.get("photo_l1", cfg.loss.photo_l1);
    o.get("photo_ssim3", cfg.loss.photo_ssim3);
    o.get("photo_ssim5", cfg.loss.photo_ssim5);
    o.get("photo_ssim7", cfg.loss.photo_ssim7);
    o.get("mask_borders", cfg.stereo.mask_borders);
  });
  r.object("depth_net", [&](Reader& o) {
    o.get("input_channels", cfg.depth_net.input_channels);
    o.get("features", cfg.depth_net.features);
    o.get("residual_blocks", cfg.depth_net.residual_blocks);
    o.get("hypotheses", cfg.depth_net.hypotheses);
    o.get("min_disparity", cfg.depth_net.min_disparity);
    o.get("max_disparity", cfg.depth_net.max_disparity);
    o.get("kernel3d", cfg.depth_net.kernel3d);
    o.get_enum("block_order", cfg.depth_net.order, kOrders);
    o.get_enum("stereo_convention", cfg.depth_net.convention, kConventions);
    o.get("sample_stats_at_eval", cfg.depth_net.sample_stats_at_eval);
  });
  cfg.stereo.convention = cfg.depth_net.convention;
  r.object("inpaint_net", [&](Reader& o) {
    o.get("views", cfg.inpaint_net.views);
    o.get("width", cfg.inpaint_net.width);
    o.get("mid_width", cfg.inpaint_net.mid_width);
    o.get("head_width", cfg.inpaint_net.head_width);
    o.get_enum("block", cfg.inpaint_net.block, kBlocks);
    o.get("batch_norm", cfg.inpaint_net.batch_norm);
    o.get_enum("block_order", cfg.inpaint_net.order, kOrders);
    o.get_enum("output", cfg.inpaint_net.output, kOutputs);
    o.get("branch_init_scale", cfg.inpaint_net.branch_init_scale);
    o.get("output_init_scale", cfg.inpaint_net.output_init_scale);
  });
  r.object("inpaint", [&](Reader& o) {
    o.get("depth_checkpoint", cfg.inpaint.depth_checkpoint);
    o.get("ground_truth_depth", cfg.inpaint.ground_truth_depth);
    o.get("min_disparity", cfg.inpaint.min_disparity);
    o.get("spacing", cfg.inpaint.spacing);
    o.get("cache_warps", cfg.inpaint.cache_warps);
  });
  r.object("data", [&](Reader& o) {
    o.get_enum("kind", cfg.data.kind, kKinds);
    o.get("root", cfg.data.root);
    o.get("sequences", cfg.data.sequences);
    o.object("crop", [&](Reader& c) {
      c.get("height", cfg.data.crop.height);
      c.get("width", cfg.data.crop.width);
    });
    o.get("scenes", cfg.data.scenes);
    o.get("first_seed", cfg.data.first_seed);
    o.object("synthetic", [&](Reader& s) { read_synthetic(s, cfg.data.synthetic); });
  });
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.string());
}

std::string to_json(const RunConfig& cfg) {
  const auto& o = cfg.optimizer;
  const auto& l = cfg.loss;
  const auto& d = cfg.depth_net;
  const auto& n = cfg.inpaint_net;
  json j = {
      {"stage", to_string(cfg.stage)},
      {"iterations", cfg.iterations},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"checkpoint_every", cfg.checkpoint_every},
      {"log_every", cfg.log_every},
      {"resume", cfg.resume},
      {"optimizer",
       {{"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps}, {"grad_clip", o.grad_clip}}},
      {"loss",
       {{"lambda0", l.lambda0},
        {"lambda1", l.lambda1},
        {"lambda2", l.lambda2},
        {"photo_l1", l.photo_l1},
        {"photo_ssim3", l.photo_ssim3},
        {"photo_ssim5", l.photo_ssim5},
        {"photo_ssim7", l.photo_ssim7},
        {"mask_borders", cfg.stereo.mask_borders}}},
      {"depth_net",
       {{"input_channels", d.input_channels},
        {"features", d.features},
        {"residual_blocks", d.residual_blocks},
        {"hypotheses", d.hypotheses},
        {"min_disparity", d.min_disparity},
        {"max_disparity", d.max_disparity},
        {"kernel3d", d.kernel3d},
        {"block_order", name_of(kOrders, d.order)},
        {"stereo_convention", name_of(kConventions, d.convention)},
        {"sample_stats_at_eval", d.sample_stats_at_eval}}},
      {"inpaint_net",
       {{"views", n.views},
        {"width", n.width},
        {"mid_width", n.mid_width},
        {"head_width", n.head_width},
        {"block", name_of(kBlocks, n.block)},
        {"batch_norm", n.batch_norm},
        {"block_order", name_of(kOrders, n.order)},
        {"output", name_of(kOutputs, n.output)},
        {"branch_init_scale", n.branch_init_scale},
        {"output_init_scale", n.output_init_scale}}},
      {"inpaint",
       {{"depth_checkpoint", cfg.inpaint.depth_checkpoint},
        {"ground_truth_depth", cfg.inpaint.ground_truth_depth},
        {"min_disparity", cfg.inpaint.min_disparity},
        {"spacing", cfg.inpaint.spacing},
        {"cache_warps", cfg.inpaint.cache_warps}}},
      {"data",
       {{"kind", name_of(kKinds, cfg.data.kind)},
        {"root", cfg.data.root},
        {"sequences", cfg.data.sequences},
        {"crop", {{"height", cfg.data.crop.height}, {"width", cfg.data.crop.width}}},
        {"scenes", cfg.data.scenes},
        {"first_seed", cfg.data.first_seed},
        {"synthetic", synthetic_json(cfg.data.synthetic)}}}};
  return j.dump(2) + "\n";
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << to_json(cfg);
}

}  // namespace svs
