#pragma once

// Central finite-difference gradient checks in 64-bit.
//
// A case wraps a scalar function of some input tensors. The checker compares
// the reverse-mode gradient of every (or a sampled subset of) input element
// with (f(x + h) - f(x - h)) / 2h and reports the largest relative error
//   |analytic - numeric| / max(|analytic|, |numeric|, floor).

#include "svs/tensor.hpp"

#include <functional>
#include <ostream>
#include <string>

namespace svs {

using ScalarFn = std::function<Tensor<double>(const TensorList<double>&)>;

struct GradCase {
  std::string name;
  ScalarFn fn;
  TensorList<double> inputs;
  double tolerance = 1e-4;
  /// Elements probed per input; 0 checks every element.
  Index samples_per_input = 0;
  /// Difference step overriding GradCheckOptions::step when positive.
  double step = 0.0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  Index checked = 0;
  double seconds = 0.0;
  bool passed = false;
  std::string error;  // non-empty when the case threw
};

GradResult check_gradients(const GradCase& c, const GradCheckOptions& options = {});

/// Cases covering every differentiable op and loss on small random shapes.
std::vector<GradCase> operator_suite(std::uint64_t seed = 1);

/// Depth network + stereo objective on 16x16 images with 4 hypotheses,
/// probing 50 random parameters. The network holds thousands of ReLU kinks,
/// so this case differences with a 1e-7 step.
GradCase pipeline_case(std::uint64_t seed = 1);

/// A square op whose backward is wrong by a factor; the harness must flag it.
GradCase corrupted_case();

/// Runs cases whose name contains `filter` (empty = all).
std::vector<GradResult> run_gradchecks(const std::vector<GradCase>& cases,
                                       const std::string& filter = {},
                                       const GradCheckOptions& options = {});

/// One line per case: "gradcheck,<name>,<max_rel_error>,<tolerance>,<checked>,PASS|FAIL".
void print_results(std::ostream& out, const std::vector<GradResult>& results);

}  // namespace svs
