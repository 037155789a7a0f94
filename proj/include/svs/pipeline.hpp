#pragma once

// Rendering a target view from a window of reference frames: depth per
// reference, forward mapping into the target camera, then inpainting.

#include "svs/dataset.hpp"

namespace svs {

struct StageTimings {
  double depth_ms = 0.0;
  double warp_ms = 0.0;
  double inpaint_ms = 0.0;
};

/// Left-camera depth of every reference in the window, predicted by the
/// network (eval mode, no graph) and converted with the disparity floor.
std::vector<Tensor<float>> predict_depths(DepthNet<float>& net, const ViewWindow& window,
                                          double min_disparity);

/// Reference views forward-mapped into the target camera, sorted nearest
/// first. Uses the window's own depth when present, else the network.
struct WarpedWindow {
  std::vector<WarpedView> views;
  std::vector<int> offsets;
};

WarpedWindow warp_window(const ViewWindow& window, DepthNet<float>* depth_net,
                         double min_disparity, StageTimings* timings = nullptr);

/// [4V,H,W] network input for the warped window.
Tensor<float> inpaint_input(const WarpedWindow& warped);

struct Rendering {
  Tensor<float> rgb;  // [3,H,W]
  WarpedWindow warped;
  StageTimings timings;
};

Rendering render_window(const ViewWindow& window, DepthNet<float>* depth_net,
                        InpaintNet<float>& inpaint_net, double min_disparity);

}  // namespace svs
