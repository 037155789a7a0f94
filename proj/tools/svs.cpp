// Command-line front end: data generation, the two training stages,
// rendering, evaluation, gradient checks and the median baseline.

#include "svs/evaluation.hpp"
#include "svs/gradcheck.hpp"
#include "svs/image_io.hpp"
#include "svs/trainer.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace svs;

namespace {

enum Exit { kOk = 0, kUsage = 1, kMissing = 2, kShape = 3, kEmpty = 4 };

class EmptyEvaluation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void progress(const std::string& msg) { std::cerr << msg << std::endl; }

// Flags shared by the commands that read a dataset.
struct DataFlags {
  std::string config;
  std::string root;
  std::vector<std::string> sequences;
  std::optional<int> scenes;
  std::optional<std::uint64_t> first_seed;
  std::optional<Index> crop_h, crop_w;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Run config (JSON)");
    cmd->add_option("--data-root", root, "KITTI-layout dataset root (default: generated scenes)");
    cmd->add_option("--sequences", sequences, "Sequence ids under the data root")->delimiter(',');
    cmd->add_option("--scenes", scenes, "Number of generated scenes");
    cmd->add_option("--first-seed", first_seed, "Seed of the first generated scene");
    cmd->add_option("--crop-height", crop_h, "Centre-crop height for KITTI frames");
    cmd->add_option("--crop-width", crop_w, "Centre-crop width for KITTI frames");
  }

  RunConfig load(Stage stage) const {
    RunConfig cfg = config.empty() ? RunConfig::defaults(stage) : load_run_config(config);
    if (!root.empty()) {
      cfg.data.kind = DatasetKind::kKitti;
      cfg.data.root = root;
    }
    if (!sequences.empty()) cfg.data.sequences = sequences;
    if (scenes) cfg.data.scenes = *scenes;
    if (first_seed) cfg.data.first_seed = *first_seed;
    if (crop_h) cfg.data.crop.height = *crop_h;
    if (crop_w) cfg.data.crop.width = *crop_w;
    return cfg;
  }
};

void log_progress(const TrainLogEntry& e) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "iter %lld  loss %.6f  %.1f s", e.iteration, e.loss,
                e.wall_ms / 1000.0);
  progress(buf);
}

// ---------------------------------------------------------------------------

int gen_data(const DataFlags& flags, const std::string& out, double spacing, int frames) {
  RunConfig cfg = flags.load(Stage::kDepth);
  if (spacing > 0) cfg.data.synthetic.frame_spacing = spacing;
  if (frames > 0) cfg.data.synthetic.frames = frames;
  cfg.validate();
  for (int i = 0; i < cfg.data.scenes; ++i) {
    const auto seed = cfg.data.first_seed + static_cast<std::uint64_t>(i);
    const SyntheticScene scene = generate_scene(seed, cfg.data.synthetic);
    std::vector<ExportFrame> export_frames;
    for (const auto& f : scene.frames) export_frames.push_back({f.left, f.right, f.depth, f.pose});
    char id[16];
    std::snprintf(id, sizeof id, "%02d", i);
    write_kitti_sequence(out, id, scene.camera, export_frames);
    progress("wrote sequence " + std::string(id) + " (seed " + std::to_string(seed) + ")");
  }
  return kOk;
}

int train_depth_cmd(const DataFlags& flags, std::optional<long long> iterations,
                    const std::string& output, std::optional<std::uint64_t> seed,
                    const std::string& resume) {
  RunConfig cfg = flags.load(Stage::kDepth);
  cfg.stage = Stage::kDepth;
  if (iterations) cfg.iterations = *iterations;
  if (!output.empty()) cfg.output_dir = output;
  if (seed) cfg.seed = *seed;
  if (!resume.empty()) cfg.resume = resume;
  cfg.validate();
  const Dataset data = load_dataset(cfg.data);
  DepthNet<float> net(cfg.depth_net, cfg.seed);
  save_run_config(fs::path(cfg.output_dir) / "depth_config.json", cfg);
  progress("training depth network: " + std::to_string(parameter_count(net.parameters())) +
           " parameters, " + std::to_string(data.pair_count()) + " stereo pairs");
  const auto r = train_depth(cfg, data, net, {log_progress});
  progress("final checkpoint: " + r.final_checkpoint.string());
  return kOk;
}

int train_inpaint_cmd(const DataFlags& flags, std::optional<long long> iterations,
                      const std::string& output, std::optional<std::uint64_t> seed,
                      const std::string& resume, const std::string& depth_ckpt, bool gt_depth,
                      std::optional<int> spacing, bool conv_blocks) {
  RunConfig cfg = flags.load(Stage::kInpaint);
  cfg.stage = Stage::kInpaint;
  if (iterations) cfg.iterations = *iterations;
  if (!output.empty()) cfg.output_dir = output;
  if (seed) cfg.seed = *seed;
  if (!resume.empty()) cfg.resume = resume;
  if (!depth_ckpt.empty()) cfg.inpaint.depth_checkpoint = depth_ckpt;
  if (gt_depth) cfg.inpaint.ground_truth_depth = true;
  if (spacing) cfg.inpaint.spacing = *spacing;
  if (conv_blocks) cfg.inpaint_net.block = InpaintBlockKind::kConv;
  if (cfg.inpaint.spacing == 0) cfg.inpaint_net.views = 1;
  cfg.validate();
  const Dataset data = load_dataset(cfg.data);
  std::optional<DepthNet<float>> depth;
  if (!cfg.inpaint.ground_truth_depth) {
    if (cfg.inpaint.depth_checkpoint.empty()) {
      throw ConfigError("train-inpaint needs --depth-checkpoint or --gt-depth");
    }
    depth.emplace(cfg.depth_net, cfg.seed);
    load_weights(cfg.inpaint.depth_checkpoint, *depth);
  }
  InpaintNet<float> net(cfg.inpaint_net, cfg.seed);
  save_run_config(fs::path(cfg.output_dir) / "inpaint_config.json", cfg);
  progress("training " + net.model_name() + ": " +
           std::to_string(parameter_count(net.parameters())) + " parameters, " +
           std::to_string(data.windows(cfg.inpaint.spacing).size()) + " windows");
  const auto r = train_inpaint(cfg, data, net, depth ? &*depth : nullptr, {log_progress});
  progress("final checkpoint: " + r.final_checkpoint.string());
  return kOk;
}

// Loads the inpainting network named by the checkpoint (residual or conv).
InpaintNet<float> load_inpaint(const RunConfig& cfg, const std::string& path) {
  if (!fs::exists(path)) throw CheckpointError("missing checkpoint: " + path);
  InpaintNetConfig net_cfg = cfg.inpaint_net;
  const Checkpoint ckpt = load_checkpoint(path);
  net_cfg.block = ckpt.model == "inpaintnet-conv-v1" ? InpaintBlockKind::kConv
                                                     : InpaintBlockKind::kResidual;
  InpaintNet<float> net(net_cfg);
  auto st = net.state();
  restore_tensors(ckpt, net.model_name(), st);
  return net;
}

std::optional<DepthNet<float>> load_depth(const RunConfig& cfg, const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::optional<DepthNet<float>> net;
  net.emplace(cfg.depth_net);
  load_weights(path, *net);
  return net;
}

std::size_t find_sequence(const Dataset& data, const std::string& id) {
  for (std::size_t i = 0; i < data.sequence_count(); ++i) {
    if (data.sequence(i).id() == id || std::to_string(i) == id) return i;
  }
  throw DatasetError("no sequence '" + id + "' in the dataset");
}

int render_cmd(const DataFlags& flags, const std::string& depth_ckpt,
               const std::string& inpaint_ckpt, bool gt_depth, const std::string& sequence,
               int target, int spacing, const std::string& out) {
  RunConfig cfg = flags.load(Stage::kInpaint);
  if (spacing == 0) cfg.inpaint_net.views = 1;
  cfg.validate();
  if (!gt_depth && depth_ckpt.empty()) throw ConfigError("render needs --depth or --gt-depth");
  auto depth = gt_depth ? std::nullopt : load_depth(cfg, depth_ckpt);
  auto inpaint = load_inpaint(cfg, inpaint_ckpt);
  const Dataset data = load_dataset(cfg.data);
  const WindowRef ref{find_sequence(data, sequence), target};
  const ViewWindow window = data.window(ref, spacing, gt_depth);
  const Rendering r = render_window(window, depth ? &*depth : nullptr, inpaint, cfg.inpaint.min_disparity);

  fs::create_directories(out);
  write_png(fs::path(out) / "render.png", r.rgb);
  for (std::size_t i = 0; i < r.warped.views.size(); ++i) {
    const std::string tag = std::to_string(r.warped.offsets[i]);
    write_png(fs::path(out) / ("warped_" + tag + ".png"), r.warped.views[i].rgb);
    write_png(fs::path(out) / ("mask_" + tag + ".png"), r.warped.views[i].mask);
  }
  const double err = frame_error(r.rgb, window.target);
  const double median_err = frame_error(median_fusion(r.warped.views).rgb, window.target);
  char line[256];
  std::snprintf(line, sizeof line,
                "window=%s spacing=%d error=%.4f median_error=%.4f depth_ms=%.1f warp_ms=%.1f "
                "inpaint_ms=%.1f\n",
                window.label.c_str(), spacing, err, median_err, r.timings.depth_ms,
                r.timings.warp_ms, r.timings.inpaint_ms);
  std::ofstream(fs::path(out) / "report.txt") << line;
  progress(line);
  return kOk;
}

struct ModelSpec {
  int trained_spacing = 1;
  std::string depth;
  std::string inpaint;
};

ModelSpec parse_model(const std::string& text) {
  std::stringstream in(text);
  ModelSpec m;
  std::string spacing;
  if (!std::getline(in, spacing, ':') || !std::getline(in, m.depth, ':') ||
      !std::getline(in, m.inpaint)) {
    throw ConfigError("--model expects SPACING:DEPTH_CKPT:INPAINT_CKPT, got '" + text + "'");
  }
  try {
    m.trained_spacing = std::stoi(spacing);
  } catch (const std::exception&) {
    throw ConfigError("--model: bad spacing '" + spacing + "'");
  }
  return m;
}

std::string metres_label(int spacing) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f m", spacing_metres(spacing));
  return buf;
}

int evaluate_cmd(const DataFlags& flags, const std::vector<std::string>& models,
                 std::vector<int> spacings, bool median, bool gt_depth, const std::string& out) {
  RunConfig cfg = flags.load(Stage::kInpaint);
  cfg.validate();
  if (models.empty() && !median) throw ConfigError("evaluate needs --model and/or --median");
  if (spacings.empty()) spacings = {1, 2, 3};
  const Dataset data = load_dataset(cfg.data);

  std::size_t total_windows = 0;
  for (int s : spacings) total_windows += data.windows(s).size();
  if (total_windows == 0) throw EmptyEvaluation("no eligible window at any requested spacing");

  SpacingTable table;
  table.test_spacings = spacings;
  std::ostringstream details;
  auto evaluate_row = [&](const std::string& label, DepthNet<float>* depth,
                          InpaintNet<float>* inpaint) {
    std::map<int, double> cells;
    for (int s : spacings) {
      const auto refs = data.windows(s);
      if (refs.empty()) continue;
      std::vector<Tensor<float>> renders, targets;
      std::vector<double> holes;
      for (const auto& ref : refs) {
        const ViewWindow w = data.window(ref, s, gt_depth);
        const WarpedWindow warped = warp_window(w, depth, cfg.inpaint.min_disparity);
        const MedianFusion fused = median_fusion(warped.views);
        holes.push_back(fused.holes.values().mean());
        if (inpaint) {
          NoGradGuard no_grad;
          inpaint->set_mode(NormMode::kEval);
          renders.push_back(inpaint->forward(inpaint_input(warped)));
        } else {
          renders.push_back(fused.rgb);
        }
        targets.push_back(w.target);
      }
      const EvalReport report = evaluate(renders, targets, holes);
      cells[s] = report.mean_error;
      details << label << ",test_spacing=" << s << ",windows=" << refs.size()
              << ",error=" << report.mean_error << ",holes=" << report.mean_hole_fraction() << "\n";
      progress(label + ": test spacing " + std::to_string(s) + " error " +
               std::to_string(report.mean_error));
    }
    table.rows.push_back({label, cells});
  };

  std::optional<DepthNet<float>> first_depth;
  for (const auto& text : models) {
    const ModelSpec m = parse_model(text);
    if (m.inpaint.empty()) throw ConfigError("--model needs an inpainting checkpoint");
    auto depth = gt_depth ? std::nullopt : load_depth(cfg, m.depth);
    if (!gt_depth && !depth) throw ConfigError("--model needs a depth checkpoint or --gt-depth");
    auto inpaint = load_inpaint(cfg, m.inpaint);
    const std::string kind = inpaint.config().block == InpaintBlockKind::kConv ? "Ours (conv)" : "Ours";
    evaluate_row(metres_label(m.trained_spacing) + " & " + kind, depth ? &*depth : nullptr, &inpaint);
    if (!first_depth && depth) first_depth = std::move(depth);
  }
  if (median) {
    if (!gt_depth && !first_depth) throw ConfigError("--median needs a depth model or --gt-depth");
    evaluate_row("- & Median", first_depth ? &*first_depth : nullptr, nullptr);
  }

  const std::string text = table.format();
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream(out) << text;
  std::ofstream(out + ".csv") << details.str();
  progress(text);
  progress("wrote " + out);
  return kOk;
}

int gradcheck_cmd(const std::string& filter, bool self_test, bool skip_pipeline,
                  const std::string& out) {
  std::vector<GradCase> cases = operator_suite();
  if (!skip_pipeline) cases.push_back(pipeline_case());
  auto results = run_gradchecks(cases, filter);
  bool ok = !results.empty();
  for (const auto& r : results) ok = ok && r.passed;
  if (self_test) {
    // The corrupted op must be caught; its failure is the expected outcome.
    const auto bad = check_gradients(corrupted_case());
    results.push_back(bad);
    ok = ok && !bad.passed;
  }
  std::ofstream f(out);
  print_results(f, results);
  progress(std::to_string(results.size()) + " cases written to " + out);
  for (const auto& r : results) {
    if (!r.passed && !(self_test && r.name == "corrupted_square")) progress("FAILED: " + r.name);
  }
  return ok ? kOk : kUsage;
}

int baseline_median_cmd(const DataFlags& flags, const std::string& depth_ckpt, bool gt_depth,
                        int spacing, const std::string& out) {
  RunConfig cfg = flags.load(Stage::kInpaint);
  cfg.validate();
  if (!gt_depth && depth_ckpt.empty()) throw ConfigError("baseline-median needs --depth or --gt-depth");
  auto depth = gt_depth ? std::nullopt : load_depth(cfg, depth_ckpt);
  const Dataset data = load_dataset(cfg.data);
  const auto refs = data.windows(spacing);
  if (refs.empty()) throw EmptyEvaluation("no eligible window at spacing " + std::to_string(spacing));
  fs::create_directories(out);
  std::vector<Tensor<float>> renders, targets;
  std::vector<double> holes;
  std::ofstream report(fs::path(out) / "median_report.csv");
  report << "window,error,holes\n";
  for (const auto& ref : refs) {
    const ViewWindow w = data.window(ref, spacing, gt_depth);
    const MedianFusion fused =
        median_fusion(warp_window(w, depth ? &*depth : nullptr, cfg.inpaint.min_disparity).views);
    std::string name = w.label;
    std::replace(name.begin(), name.end(), ':', '_');
    write_png(fs::path(out) / (name + ".png"), fused.rgb);
    renders.push_back(fused.rgb);
    targets.push_back(w.target);
    holes.push_back(fused.holes.values().mean());
    report << w.label << "," << frame_error(fused.rgb, w.target) << "," << holes.back() << "\n";
  }
  const EvalReport r = evaluate(renders, targets, holes);
  report << "mean," << r.mean_error << "," << r.mean_hole_fraction() << "\n";
  progress("median baseline: " + std::to_string(refs.size()) + " windows, error " +
           std::to_string(r.mean_error));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo depth, forward mapping and inpainting for novel view synthesis"};
  app.require_subcommand(1, 1);

  DataFlags gen_flags, depth_flags, inpaint_flags, render_flags, eval_flags, median_flags;
  std::string out, output, resume, depth_ckpt, inpaint_ckpt, sequence = "0", filter;
  std::optional<long long> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<int> train_spacing;
  double frame_spacing = 0;
  int frames = 0, target = 2, spacing = 1;
  bool gt_depth = false, conv_blocks = false, median = false, self_test = false, skip_pipeline = false;
  std::vector<std::string> models;
  std::vector<int> spacings;

  auto* gen = app.add_subcommand("gen-data", "Write generated scenes in KITTI layout");
  gen_flags.add(gen);
  gen->add_option("--out", out, "Output dataset root")->required();
  gen->add_option("--frame-spacing", frame_spacing, "Metres between frames");
  gen->add_option("--frames", frames, "Frames per sequence");

  auto* td = app.add_subcommand("train-depth", "Train the stereo depth network");
  depth_flags.add(td);
  td->add_option("--iterations", iterations);
  td->add_option("--output", output, "Run directory");
  td->add_option("--seed", seed);
  td->add_option("--resume", resume, "Training checkpoint to continue from");

  auto* ti = app.add_subcommand("train-inpaint", "Train the inpainting network");
  inpaint_flags.add(ti);
  ti->add_option("--iterations", iterations);
  ti->add_option("--output", output, "Run directory");
  ti->add_option("--seed", seed);
  ti->add_option("--resume", resume, "Training checkpoint to continue from");
  ti->add_option("--depth-checkpoint", depth_ckpt, "Frozen depth network");
  ti->add_flag("--gt-depth", gt_depth, "Warp with dataset depth");
  ti->add_option("--spacing", train_spacing, "Window spacing in frames");
  ti->add_flag("--conv-blocks", conv_blocks, "Plain convolution stages instead of residual");

  auto* rd = app.add_subcommand("render", "Render one target frame from its window");
  render_flags.add(rd);
  rd->add_option("--depth", depth_ckpt, "Depth checkpoint");
  rd->add_option("--inpaint", inpaint_ckpt, "Inpainting checkpoint")->required();
  rd->add_flag("--gt-depth", gt_depth, "Warp with dataset depth");
  rd->add_option("--sequence", sequence, "Sequence id or index");
  rd->add_option("--target", target, "Target frame");
  rd->add_option("--spacing", spacing, "Window spacing (0 = target as its own reference)");
  rd->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Mean brightness error over all windows");
  eval_flags.add(ev);
  ev->add_option("--model", models, "SPACING:DEPTH_CKPT:INPAINT_CKPT (repeatable)");
  ev->add_option("--spacings", spacings, "Test spacings")->delimiter(',');
  ev->add_flag("--median", median, "Add the median-of-warped-views row");
  ev->add_flag("--gt-depth", gt_depth, "Warp with dataset depth");
  ev->add_option("--out", out, "Table file")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  gc->add_option("--filter", filter, "Only cases whose name contains this");
  gc->add_flag("--self-test", self_test, "Also confirm a corrupted op is caught");
  gc->add_flag("--skip-pipeline", skip_pipeline, "Skip the composed network case");
  gc->add_option("--out", out, "Result file")->required();

  auto* bm = app.add_subcommand("baseline-median", "Median of forward-warped views");
  median_flags.add(bm);
  bm->add_option("--depth", depth_ckpt, "Depth checkpoint");
  bm->add_flag("--gt-depth", gt_depth, "Warp with dataset depth");
  bm->add_option("--spacing", spacing, "Window spacing in frames");
  bm->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return gen_data(gen_flags, out, frame_spacing, frames);
    if (*td) return train_depth_cmd(depth_flags, iterations, output, seed, resume);
    if (*ti) {
      return train_inpaint_cmd(inpaint_flags, iterations, output, seed, resume, depth_ckpt,
                               gt_depth, train_spacing, conv_blocks);
    }
    if (*rd) {
      return render_cmd(render_flags, depth_ckpt, inpaint_ckpt, gt_depth, sequence, target,
                        spacing, out);
    }
    if (*ev) return evaluate_cmd(eval_flags, models, spacings, median, gt_depth, out);
    if (*gc) return gradcheck_cmd(filter, self_test, skip_pipeline, out);
    if (*bm) return baseline_median_cmd(median_flags, depth_ckpt, gt_depth, spacing, out);
  } catch (const EmptyEvaluation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEmpty;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const ImageIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kShape;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kShape;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kShape;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
