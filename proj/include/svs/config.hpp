#pragma once

// Run configuration: every training and rendering hyperparameter, with the
// published defaults, read from and written to JSON.

#include "svs/depth_net.hpp"
#include "svs/inpaint_net.hpp"
#include "svs/kitti.hpp"
#include "svs/losses.hpp"
#include "svs/synthetic.hpp"

#include <filesystem>
#include <string>

namespace svs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Stage { kDepth, kInpaint };

struct AdamOptions {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
};

enum class DatasetKind { kSynthetic, kKitti };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthetic;
  // KITTI layout
  std::string root;
  std::vector<std::string> sequences{"00"};
  CropSpec crop;
  // Generated scenes: seeds first_seed .. first_seed + scenes - 1
  int scenes = 20;
  std::uint64_t first_seed = 1;
  SyntheticConfig synthetic;
};

struct InpaintStageOptions {
  std::string depth_checkpoint;
  /// Warp with dataset depth instead of predicted depth.
  bool ground_truth_depth = false;
  /// Disparity floor for depth conversion, pixels.
  double min_disparity = 0.5;
  int spacing = 1;
  /// Keep warped inputs in memory across iterations.
  bool cache_warps = true;
};

struct RunConfig {
  Stage stage = Stage::kDepth;
  long long iterations = 200000;
  int batch_size = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  long long checkpoint_every = 1000;
  long long log_every = 10;
  std::string resume;

  AdamOptions optimizer;
  LossWeights loss;
  StereoLossOptions stereo;
  DepthNetConfig depth_net;
  InpaintNetConfig inpaint_net;
  InpaintStageOptions inpaint;
  DatasetSpec data;

  /// Defaults for a stage: 200,000 depth or 1,000,000 inpainting iterations.
  static RunConfig defaults(Stage stage);
  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

/// Parses JSON text over the stage defaults. Unknown keys are errors.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

std::string to_string(Stage stage);

}  // namespace svs
