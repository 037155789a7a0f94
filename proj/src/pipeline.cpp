#include "svs/pipeline.hpp"

#include <chrono>

namespace svs {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<Tensor<float>> predict_depths(DepthNet<float>& net, const ViewWindow& window,
                                          double min_disparity) {
  NoGradGuard no_grad;
  const NormMode previous = net.mode();
  net.set_mode(NormMode::kEval);
  std::vector<Tensor<float>> depths;
  for (std::size_t i = 0; i < window.left.size(); ++i) {
    const auto d = net.predict(window.left[i], window.right[i]);
    depths.push_back(disparity_to_depth(d.left, window.camera, min_disparity).depth);
  }
  net.set_mode(previous);
  return depths;
}

WarpedWindow warp_window(const ViewWindow& window, DepthNet<float>* depth_net,
                         double min_disparity, StageTimings* timings) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Tensor<float>> depths = window.depth;
  if (depths.empty()) {
    if (!depth_net) throw std::invalid_argument("window " + window.label + " has no depth and no depth network was given");
    depths = predict_depths(*depth_net, window, min_disparity);
  }
  if (timings) timings->depth_ms += ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const std::vector<CameraModel> cams(window.left.size(), window.camera);
  const auto views = warp_reference_set(window.left, depths, cams, window.to_target);
  WarpedWindow out;
  for (std::size_t i : view_order(window.offsets)) {
    out.views.push_back(views[i]);
    out.offsets.push_back(window.offsets[i]);
  }
  if (timings) timings->warp_ms += ms_since(t0);
  return out;
}

Tensor<float> inpaint_input(const WarpedWindow& warped) { return stack_views(warped.views); }

Rendering render_window(const ViewWindow& window, DepthNet<float>* depth_net,
                        InpaintNet<float>& inpaint_net, double min_disparity) {
  Rendering r;
  r.warped = warp_window(window, depth_net, min_disparity, &r.timings);
  const auto t0 = std::chrono::steady_clock::now();
  {
    NoGradGuard no_grad;
    const NormMode previous = inpaint_net.mode();
    inpaint_net.set_mode(NormMode::kEval);
    r.rgb = inpaint_net.forward(inpaint_input(r.warped));
    inpaint_net.set_mode(previous);
  }
  r.timings.inpaint_ms = ms_since(t0);
  return r;
}

}  // namespace svs
