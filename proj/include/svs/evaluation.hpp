#pragma once

// Rendering error metric: mean absolute brightness difference per pixel per
// colour channel on the [0,255] scale, averaged over frames.

#include "svs/depth_net.hpp"

#include <map>
#include <string>

namespace svs {

struct EvalReport {
  double mean_error = 0.0;  // [0,255] scale
  std::vector<double> frame_errors;
  /// Fraction of target pixels no reference view covered, per frame.
  std::vector<double> hole_fractions;

  double mean_hole_fraction() const;
};

/// Mean |render - target| * 255 over pixels and channels of one frame.
double frame_error(const Tensor<float>& render, const Tensor<float>& target);

EvalReport evaluate(const std::vector<Tensor<float>>& renders,
                    const std::vector<Tensor<float>>& targets,
                    const std::vector<double>& hole_fractions = {});

/// Rows: trained spacing (or method); columns: test spacing. Missing cells
/// print as "-".
struct SpacingTable {
  std::vector<int> test_spacings;
  /// (row label, per-test-spacing error).
  std::vector<std::pair<std::string, std::map<int, double>>> rows;

  std::string format() const;
};

/// Exhaustive stereo matching: per hypothesis, the channel-summed absolute
/// difference between the left image and the right image sampled at x - d,
/// averaged over a (2r+1)^2 box clipped to the frame. Winner-take-all with
/// parabolic sub-hypothesis refinement. Returns left disparity [1,H,W].
Tensor<float> block_matching_disparity(const Tensor<float>& left, const Tensor<float>& right,
                                       const DisparityHypotheses& hyps, Index radius);

/// Pixels where left-view disparity is defined: visible in the right view
/// and with x - d inside the frame.
Tensor<float> disparity_eval_mask(const Tensor<float>& disparity, const Tensor<float>& occluded);

/// Mean |pred - truth| in pixels over mask = 1.
double disparity_error(const Tensor<float>& pred, const Tensor<float>& truth,
                       const Tensor<float>& mask);

/// Metres of camera travel for a spacing of k frames (0.8 m per frame).
double spacing_metres(int spacing, double metres_per_frame = 0.8);

}  // namespace svs
