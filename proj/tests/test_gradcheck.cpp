#include "doctest.h"

#include "svs/gradcheck.hpp"

#include <set>
#include <sstream>

using namespace svs;

TEST_CASE("every operator passes the finite-difference check") {
  const auto results = run_gradchecks(operator_suite());
  CHECK(results.size() >= 30);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CAPTURE(r.max_rel_error);
    CHECK(r.error.empty());
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("suite covers the required operations") {
  std::set<std::string> names;
  for (const auto& c : operator_suite()) names.insert(c.name);
  for (const char* required : {"conv2d", "conv3d", "conv_transpose3d", "batch_norm_train", "bilinear_sample",
                               "soft_argmin", "ssim_3", "ssim_5", "ssim_7", "photometric_loss",
                               "lr_consistency_loss", "smoothness_loss", "total_loss", "inpaint_loss"}) {
    CHECK(names.count(required) == 1);
  }
}

TEST_CASE("composed pipeline passes at 1e-3") {
  const auto r = check_gradients(pipeline_case());
  CAPTURE(r.max_rel_error);
  CHECK(r.tolerance == 1e-3);
  CHECK(r.checked == 50);
  CHECK(r.passed);
}

TEST_CASE("a corrupted backward is caught and named") {
  const auto r = check_gradients(corrupted_case());
  CHECK_FALSE(r.passed);
  std::ostringstream out;
  print_results(out, {r});
  CHECK(out.str().rfind("gradcheck,corrupted_square,", 0) == 0);
  CHECK(out.str().find(",FAIL") != std::string::npos);
}

TEST_CASE("filter selects cases by name") {
  const auto results = run_gradchecks(operator_suite(), "conv3d");
  CHECK(results.size() == 2);
}
