#include "svs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace svs {

double EvalReport::mean_hole_fraction() const {
  if (hole_fractions.empty()) return 0.0;
  return std::accumulate(hole_fractions.begin(), hole_fractions.end(), 0.0) /
         static_cast<double>(hole_fractions.size());
}

double frame_error(const Tensor<float>& render, const Tensor<float>& target) {
  if (render.shape() != target.shape()) {
    throw ShapeError("evaluate: render " + to_string(render.shape()) + " and target " +
                     to_string(target.shape()) + " differ in size");
  }
  double acc = 0.0;
  for (Index i = 0; i < render.numel(); ++i) {
    acc += std::abs(static_cast<double>(render[i]) - static_cast<double>(target[i]));
  }
  return 255.0 * acc / static_cast<double>(render.numel());
}

EvalReport evaluate(const std::vector<Tensor<float>>& renders,
                    const std::vector<Tensor<float>>& targets,
                    const std::vector<double>& hole_fractions) {
  if (renders.size() != targets.size()) {
    throw ShapeError("evaluate: " + std::to_string(renders.size()) + " renders for " +
                     std::to_string(targets.size()) + " targets");
  }
  if (renders.empty()) throw std::invalid_argument("evaluate: no frames");
  EvalReport report;
  for (std::size_t i = 0; i < renders.size(); ++i) {
    report.frame_errors.push_back(frame_error(renders[i], targets[i]));
  }
  report.mean_error = std::accumulate(report.frame_errors.begin(), report.frame_errors.end(), 0.0) /
                      static_cast<double>(report.frame_errors.size());
  report.hole_fractions = hole_fractions;
  return report;
}

Tensor<float> block_matching_disparity(const Tensor<float>& left, const Tensor<float>& right,
                                       const DisparityHypotheses& hyps, Index radius) {
  if (left.rank() != 3 || left.shape() != right.shape()) {
    throw ShapeError("block_matching_disparity: expected two [C,H,W] images of one size, got " +
                     to_string(left.shape()) + " and " + to_string(right.shape()));
  }
  hyps.validate();
  const Index c = left.dim(0), h = left.dim(1), w = left.dim(2), n = h * w;
  const Index levels = hyps.size();
  Eigen::ArrayXXd cost(levels, n);
  Eigen::ArrayXXd integral(h + 1, w + 1);
  for (Index k = 0; k < levels; ++k) {
    const auto rec =
        warp_stereo(right, Tensor<float>({1, h, w}, static_cast<float>(hyps.values[k])),
                    StereoSide::kLeft);
    integral.setZero();
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        double e = 0.0;
        for (Index ch = 0; ch < c; ++ch) e += std::abs(rec[ch * n + y * w + x] - left[ch * n + y * w + x]);
        integral(y + 1, x + 1) = e + integral(y, x + 1) + integral(y + 1, x) - integral(y, x);
      }
    }
    for (Index y = 0; y < h; ++y) {
      const Index y0 = std::max<Index>(0, y - radius), y1 = std::min(h, y + radius + 1);
      for (Index x = 0; x < w; ++x) {
        const Index x0 = std::max<Index>(0, x - radius), x1 = std::min(w, x + radius + 1);
        const double area = static_cast<double>((y1 - y0) * (x1 - x0));
        cost(k, y * w + x) =
            (integral(y1, x1) - integral(y0, x1) - integral(y1, x0) + integral(y0, x0)) / area;
      }
    }
  }
  Tensor<float> out({1, h, w});
  for (Index p = 0; p < n; ++p) {
    Index best = 0;
    cost.col(p).minCoeff(&best);
    double d = hyps.values[best];
    if (best > 0 && best + 1 < levels) {
      const double c0 = cost(best - 1, p), c1 = cost(best, p), c2 = cost(best + 1, p);
      const double den = c0 - 2.0 * c1 + c2;
      const double step = 0.5 * (hyps.values[best + 1] - hyps.values[best - 1]);
      if (den > 0) d += 0.5 * (c0 - c2) / den * step;
    }
    out[p] = static_cast<float>(d);
  }
  return out;
}

Tensor<float> disparity_eval_mask(const Tensor<float>& disparity, const Tensor<float>& occluded) {
  if (disparity.rank() != 3 || disparity.shape() != occluded.shape()) {
    throw ShapeError("disparity_eval_mask: expected matching [1,H,W] maps");
  }
  const Index w = disparity.dim(2);
  Tensor<float> mask(disparity.shape());
  for (Index p = 0; p < disparity.numel(); ++p) {
    const Index x = p % w;
    mask[p] = occluded[p] > 0.5f || static_cast<double>(x) - disparity[p] < 0.0 ? 0.0f : 1.0f;
  }
  return mask;
}

double disparity_error(const Tensor<float>& pred, const Tensor<float>& truth,
                       const Tensor<float>& mask) {
  if (pred.shape() != truth.shape() || pred.shape() != mask.shape()) {
    throw ShapeError("disparity_error: shapes differ");
  }
  double acc = 0.0, count = 0.0;
  for (Index p = 0; p < pred.numel(); ++p) {
    if (mask[p] < 0.5f) continue;
    acc += std::abs(static_cast<double>(pred[p]) - static_cast<double>(truth[p]));
    count += 1.0;
  }
  if (count == 0.0) throw std::invalid_argument("disparity_error: empty mask");
  return acc / count;
}

double spacing_metres(int spacing, double metres_per_frame) {
  return metres_per_frame * static_cast<double>(spacing);
}

std::string SpacingTable::format() const {
  std::ostringstream out;
  char buf[64];
  out << "Spacing & Method";
  for (int s : test_spacings) {
    std::snprintf(buf, sizeof buf, " & Test %.1f m", spacing_metres(s));
    out << buf;
  }
  out << "\n";
  for (const auto& [label, cells] : rows) {
    out << label;
    for (int s : test_spacings) {
      const auto it = cells.find(s);
      if (it == cells.end()) {
        out << " & -";
      } else {
        std::snprintf(buf, sizeof buf, " & %.2f", it->second);
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace svs
