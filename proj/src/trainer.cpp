#include "svs/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace svs {

namespace fs = std::filesystem;

template <typename T>
Adam<T>::Adam(NamedTensors<T> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Tensor<T>::Array::Zero(p.tensor.numel()));
    v_.push_back(Tensor<T>::Array::Zero(p.tensor.numel()));
  }
}

template <typename T>
void Adam<T>::step() {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    const auto& g = p.tensor.grad();
    if (!g.isFinite().all()) {
      throw TrainingError("non-finite gradient in parameter '" + p.name + "' at step " +
                          std::to_string(steps_ + 1));
    }
    sq += g.template cast<double>().square().sum();
  }
  last_norm_ = std::sqrt(sq);
  const T clip = options_.grad_clip > 0 && last_norm_ > options_.grad_clip
                     ? static_cast<T>(options_.grad_clip / last_norm_)
                     : T(1);

  ++steps_;
  const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(options_.beta1, static_cast<double>(steps_)));
  const T c2 = static_cast<T>(1.0 - std::pow(options_.beta2, static_cast<double>(steps_)));
  const T lr = static_cast<T>(options_.lr), eps = static_cast<T>(options_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].tensor;
    auto& m = m_[i];
    auto& v = v_[i];
    if (p.has_grad()) {
      const auto g = (p.grad() * clip).eval();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
    } else {
      m *= b1;
      v *= b2;
    }
    p.values() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    p.zero_grad();
  }
}

template <typename T>
NamedTensors<T> Adam<T>::state() const {
  NamedTensors<T> out;
  out.push_back({"adam.step", Tensor<T>::scalar(static_cast<T>(steps_))});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"adam.m." + params_[i].name, Tensor<T>(params_[i].tensor.shape(), m_[i])});
    out.push_back({"adam.v." + params_[i].name, Tensor<T>(params_[i].tensor.shape(), v_[i])});
  }
  return out;
}

template <typename T>
void Adam<T>::restore(const Checkpoint& ckpt) {
  auto st = state();
  restore_tensors(ckpt, ckpt.model, st);
  steps_ = static_cast<long long>(st[0].tensor.item());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i] = st[1 + 2 * i].tensor.values();
    v_[i] = st[2 + 2 * i].tensor.values();
  }
}

template class Adam<float>;
template class Adam<double>;

// ---------------------------------------------------------------------------

fs::path checkpoint_path(const fs::path& dir, Stage stage, long long iteration) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_iter_%07lld.svck", to_string(stage).c_str(), iteration);
  return dir / buf;
}

fs::path final_checkpoint_path(const fs::path& dir, Stage stage) {
  return dir / (to_string(stage) + "_final.svck");
}

fs::path log_path(const fs::path& dir, Stage stage) {
  return dir / (to_string(stage) + "_train.log");
}

void load_weights(const fs::path& path, DepthNet<float>& net) {
  if (!fs::exists(path)) throw CheckpointError("missing checkpoint: " + path.string());
  auto st = net.state();
  restore_tensors(load_checkpoint(path), DepthNet<float>::kModelName, st);
}

void load_weights(const fs::path& path, InpaintNet<float>& net) {
  if (!fs::exists(path)) throw CheckpointError("missing checkpoint: " + path.string());
  auto st = net.state();
  restore_tensors(load_checkpoint(path), net.model_name(), st);
}

StereoLoss<float> depth_step_loss(DepthNet<float>& net, const StereoPair& pair,
                                  const RunConfig& cfg) {
  const auto d = net.predict(pair.left, pair.right);
  return stereo_objective(pair.left, pair.right, d.left, d.right, cfg.loss, cfg.stereo);
}

namespace {

constexpr const char* kIterationEntry = "trainer.iteration";

template <typename Net>
Checkpoint training_checkpoint(const std::string& model, const Net& net, const Adam<float>& adam,
                               long long iteration) {
  auto tensors = net.state();
  for (auto& t : adam.state()) tensors.push_back(t);
  tensors.push_back({kIterationEntry, Tensor<float>::scalar(static_cast<float>(iteration))});
  return make_checkpoint(model, tensors);
}

// Shared loop: `sample_loss(iteration, slot)` builds the scalar loss graph of
// one sample.
template <typename Net, typename LossFn>
TrainResult run_training(const RunConfig& cfg, Stage stage, const std::string& model, Net& net,
                         LossFn&& sample_loss, const TrainHooks& hooks) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  net.set_mode(NormMode::kTraining);
  Adam<float> adam(net.parameters(), cfg.optimizer);

  TrainResult result;
  long long start = 0;
  if (!cfg.resume.empty()) {
    if (!fs::exists(cfg.resume)) throw CheckpointError("missing checkpoint: " + cfg.resume);
    const Checkpoint ckpt = load_checkpoint(cfg.resume);
    auto st = net.state();
    restore_tensors(ckpt, model, st);
    adam.restore(ckpt);
    const auto* it = ckpt.find(kIterationEntry);
    if (!it) throw CheckpointError(cfg.resume + ": not a training checkpoint (no iteration)");
    start = static_cast<long long>(it->values.at(0));
  }
  result.first_iteration = start;
  result.last_iteration = start;

  std::ofstream log(log_path(dir, stage), std::ios::app);
  if (!log) throw TrainingError("cannot open training log in " + dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  const float inv_batch = 1.0f / static_cast<float>(cfg.batch_size);

  for (long long it = start; it < cfg.iterations; ++it) {
    double total = 0.0;
    try {
      for (int slot = 0; slot < cfg.batch_size; ++slot) {
        Tensor<float> loss = sample_loss(it, slot);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss at iteration " + std::to_string(it + 1));
        }
        if (cfg.batch_size > 1) loss = scale(loss, inv_batch);
        loss.backward();
        total += value;
      }
      adam.step();
    } catch (const TrainingError&) {
      for (auto& p : net.parameters()) p.tensor.zero_grad();
      const auto keep = dir / (to_string(stage) + "_last_good.svck");
      save_checkpoint(keep, training_checkpoint(model, net, adam, it));
      throw;
    }
    const long long done = it + 1;
    result.last_iteration = done;
    result.final_loss = total / cfg.batch_size;
    if (done % cfg.log_every == 0 || done == cfg.iterations) {
      TrainLogEntry e{done, result.final_loss,
                      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count()};
      char line[128];
      std::snprintf(line, sizeof line, "%lld,%.9g,%.1f\n", e.iteration, e.loss, e.wall_ms);
      log << line << std::flush;
      result.log.push_back(e);
      if (hooks.on_log) hooks.on_log(e);
    }
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
      save_checkpoint(checkpoint_path(dir, stage, done), training_checkpoint(model, net, adam, done));
    }
  }
  result.final_checkpoint = final_checkpoint_path(dir, stage);
  save_checkpoint(result.final_checkpoint,
                  training_checkpoint(model, net, adam, result.last_iteration));
  return result;
}

}  // namespace

TrainResult train_depth(const RunConfig& cfg, const Dataset& data, DepthNet<float>& net,
                        const TrainHooks& hooks) {
  cfg.validate();
  const Index count = data.pair_count();
  if (count == 0) throw DatasetError("depth training: dataset holds no stereo pairs");
  net.check_input(data.pair(0).left);
  return run_training(
      cfg, Stage::kDepth, DepthNet<float>::kModelName, net,
      [&](long long it, int slot) {
        const StereoPair pair = data.pair(sample_index(cfg.seed, it, slot, count));
        return depth_step_loss(net, pair, cfg).total;
      },
      hooks);
}

TrainResult train_inpaint(const RunConfig& cfg, const Dataset& data, InpaintNet<float>& net,
                          DepthNet<float>* depth_net, const TrainHooks& hooks) {
  cfg.validate();
  const int spacing = cfg.inpaint.spacing;
  const auto windows = data.windows(spacing);
  if (windows.empty()) {
    throw DatasetError("inpaint training: no window with spacing " + std::to_string(spacing) +
                       " fits the dataset");
  }
  const int refs = spacing == 0 ? 1 : 4;
  if (cfg.inpaint_net.views != refs) {
    throw ConfigError("inpaint_net.views is " + std::to_string(cfg.inpaint_net.views) +
                      " but windows at spacing " + std::to_string(spacing) + " have " +
                      std::to_string(refs) + " references");
  }
  const bool gt = cfg.inpaint.ground_truth_depth;
  if (!gt && !depth_net) throw ConfigError("inpaint training needs a depth checkpoint or ground-truth depth");
  if (gt && !data.sequence(0).has_depth()) {
    throw DatasetError("inpaint training: ground-truth depth requested but the dataset has none");
  }

  // Depth weights are never handed to the optimizer and run without a graph.
  struct Example {
    Tensor<float> input;
    Tensor<float> target;
  };
  std::map<Index, Example> cache;
  auto example = [&](Index k) {
    if (auto hit = cache.find(k); hit != cache.end()) return hit->second;
    const ViewWindow w = data.window(windows[static_cast<std::size_t>(k)], spacing, gt);
    Example e{inpaint_input(warp_window(w, depth_net, cfg.inpaint.min_disparity)), w.target};
    if (cfg.inpaint.cache_warps) cache.emplace(k, e);
    return e;
  };
  const Index count = static_cast<Index>(windows.size());
  return run_training(
      cfg, Stage::kInpaint, net.model_name(), net,
      [&](long long it, int slot) {
        const Example e = example(sample_index(cfg.seed, it, slot, count));
        return inpaint_loss(net.forward(e.input), e.target);
      },
      hooks);
}

}  // namespace svs
