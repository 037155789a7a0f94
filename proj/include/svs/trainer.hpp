#pragma once

// Adam and the two training procedures: the unsupervised depth network on
// stereo pairs, then the inpainting network on frozen-depth warps.

#include "svs/checkpoint.hpp"
#include "svs/pipeline.hpp"

#include <functional>

namespace svs {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
class Adam {
 public:
  Adam(NamedTensors<T> params, AdamOptions options);

  /// Updates every parameter from its accumulated gradient (missing
  /// gradients count as zero) and clears the gradients. A non-finite
  /// gradient throws TrainingError naming the parameter; nothing changes.
  void step();

  long long steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  /// Global gradient norm seen by the last step, before clipping.
  double last_grad_norm() const { return last_norm_; }

  /// "adam.step", "adam.m.<param>", "adam.v.<param>".
  NamedTensors<T> state() const;
  void restore(const Checkpoint& ckpt);

 private:
  NamedTensors<T> params_;
  AdamOptions options_;
  std::vector<typename Tensor<T>::Array> m_, v_;
  long long steps_ = 0;
  double last_norm_ = 0.0;
};

struct TrainLogEntry {
  long long iteration = 0;  // 1-based count of completed steps
  double loss = 0.0;
  double wall_ms = 0.0;  // since the start of this run
};

struct TrainHooks {
  std::function<void(const TrainLogEntry&)> on_log;
};

struct TrainResult {
  long long first_iteration = 0;  // steps already done when the run began
  long long last_iteration = 0;
  double final_loss = 0.0;
  std::filesystem::path final_checkpoint;
  std::vector<TrainLogEntry> log;
};

/// Checkpoint file names inside the output directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Stage stage,
                                      long long iteration);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& dir, Stage stage);
std::filesystem::path log_path(const std::filesystem::path& dir, Stage stage);

/// Loads model parameters and buffers from a checkpoint file.
void load_weights(const std::filesystem::path& path, DepthNet<float>& net);
void load_weights(const std::filesystem::path& path, InpaintNet<float>& net);

/// One loss evaluation for a stereo pair (no update).
StereoLoss<float> depth_step_loss(DepthNet<float>& net, const StereoPair& pair,
                                  const RunConfig& cfg);

/// Trains on stereo pairs drawn deterministically from (seed, iteration).
/// Writes checkpoints every cfg.checkpoint_every steps plus a final one, and
/// appends "iter,loss,wall_ms" lines to the stage log every cfg.log_every
/// steps. A non-finite loss throws TrainingError; the last checkpoint on
/// disk is left untouched and the pre-step state is saved as "_last_good".
TrainResult train_depth(const RunConfig& cfg, const Dataset& data, DepthNet<float>& net,
                        const TrainHooks& hooks = {});

/// Trains on windows at cfg.inpaint.spacing. Warps use dataset depth when
/// cfg.inpaint.ground_truth_depth is set, otherwise the frozen depth network.
TrainResult train_inpaint(const RunConfig& cfg, const Dataset& data, InpaintNet<float>& net,
                          DepthNet<float>* depth_net, const TrainHooks& hooks = {});

}  // namespace svs
