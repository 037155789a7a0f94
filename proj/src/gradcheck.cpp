#include "svs/gradcheck.hpp"

#include "svs/depth_net.hpp"
#include "svs/inpaint_net.hpp"
#include "svs/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace svs {

namespace {

using T64 = Tensor<double>;

T64 uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  T64 t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

// Random values whose magnitude stays at least `gap` away from zero, so
// kinks of relu/abs are never straddled by the difference step.
T64 away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 0.05) {
  std::uniform_real_distribution<double> mag(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  T64 t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

// Fractional sample coordinates strictly inside (0, extent - 1), never
// within 0.1 of an integer.
T64 fractional_grid(Index h, Index w, Index src_h, Index src_w, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> col(0, src_w - 2), row(0, src_h - 2);
  std::uniform_real_distribution<double> frac(0.1, 0.9);
  T64 g({2, h, w});
  for (Index i = 0; i < h * w; ++i) {
    g[i] = static_cast<double>(col(rng)) + frac(rng);
    g[h * w + i] = static_cast<double>(row(rng)) + frac(rng);
  }
  return g;
}

// Projects a tensor-valued op onto a scalar with fixed random weights.
T64 project(const T64& y, const T64& weights) { return sum(mul(y, weights)); }

ScalarFn projected(std::function<T64(const TensorList<double>&)> op, T64 weights) {
  return [op = std::move(op), weights](const TensorList<double>& in) {
    return project(op(in), weights);
  };
}

template <typename Op>
GradCase projected_case(std::string name, TensorList<double> inputs, Shape out_shape, Op op,
                        std::mt19937_64& rng, Index samples = 0) {
  GradCase c;
  c.name = std::move(name);
  c.inputs = std::move(inputs);
  c.fn = projected(op, uniform(std::move(out_shape), rng, -1.0, 1.0));
  c.samples_per_input = samples;
  return c;
}

GradCase scalar_case(std::string name, TensorList<double> inputs, ScalarFn fn, Index samples = 0) {
  GradCase c;
  c.name = std::move(name);
  c.inputs = std::move(inputs);
  c.fn = std::move(fn);
  c.samples_per_input = samples;
  return c;
}

// Square with a backward pass that is off by 50 percent.
T64 corrupted_square(const T64& a) {
  return T64::make_result(a.shape(), a.values().square(), {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) *s += 3.0 * g * a.values();
  });
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

GradResult check_gradients(const GradCase& c, const GradCheckOptions& options) {
  GradResult r;
  r.name = c.name;
  r.tolerance = c.tolerance;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TensorList<double> inputs;
    for (const auto& x : c.inputs) inputs.push_back(x.detach().requires_grad_());
    const T64 loss = c.fn(inputs);
    if (loss.numel() != 1) throw ShapeError(c.name + ": case must produce a scalar");
    loss.backward();

    std::mt19937_64 rng(options.seed ^ std::hash<std::string>{}(c.name));
    const double h = c.step > 0 ? c.step : options.step;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Index n = inputs[k].numel();
      std::vector<Index> probe(static_cast<std::size_t>(n));
      std::iota(probe.begin(), probe.end(), Index{0});
      if (c.samples_per_input > 0 && c.samples_per_input < n) {
        std::shuffle(probe.begin(), probe.end(), rng);
        probe.resize(static_cast<std::size_t>(c.samples_per_input));
      }
      const bool has = inputs[k].has_grad();
      for (Index i : probe) {
        const double analytic = has ? inputs[k].grad()[i] : 0.0;
        double numeric = 0.0;
        {
          NoGradGuard guard;
          const double x0 = inputs[k][i];
          inputs[k][i] = x0 + h;
          const double fp = c.fn(inputs).item();
          inputs[k][i] = x0 - h;
          const double fm = c.fn(inputs).item();
          inputs[k][i] = x0;
          numeric = (fp - fm) / (2 * h);
        }
        const double denom =
            std::max({std::abs(analytic), std::abs(numeric), options.floor});
        r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
        ++r.checked;
      }
    }
    r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error < c.tolerance;
  } catch (const std::exception& e) {
    r.error = e.what();
    r.passed = false;
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<GradCase> operator_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCase> cases;

  // Elementwise and shape ops.
  cases.push_back(projected_case(
      "elementwise", {away_from_zero({2, 3, 4}, rng), uniform({2, 3, 4}, rng, 0.5, 1.5)},
      {2, 3, 4},
      [](const TensorList<double>& in) {
        const auto& a = in[0];
        const auto& b = in[1];
        return add(mul(relu(a), b), sub(div(exp(scale(a, 0.5)), b), square(abs(a)))) +
               sigmoid(add_scalar(a, 0.3));
      },
      rng));
  cases.push_back(projected_case(
      "clamp", {uniform({3, 5}, rng, 0.1, 0.4)}, {3, 5},
      [](const TensorList<double>& in) { return clamp(in[0], 0.0, 0.5) + clamp(in[0], 0.2, 1.0); },
      rng));
  cases.push_back(projected_case(
      "mean_dim", {uniform({2, 3, 4}, rng, -1, 1)}, {2, 1, 4},
      [](const TensorList<double>& in) {
        return mean_dim(square(in[0]), 1) + scale(mean_dim(in[0], 1), 2.0);
      },
      rng));
  cases.push_back(scalar_case("sum_mean", {uniform({3, 4}, rng, -1, 1)},
                              [](const TensorList<double>& in) {
                                return add(sum(square(in[0])), scale(mean(in[0]), 3.0));
                              }));
  cases.push_back(projected_case(
      "narrow_concat", {uniform({2, 3, 4}, rng, -1, 1), uniform({2, 2, 4}, rng, -1, 1)},
      {2, 4, 4},
      [](const TensorList<double>& in) {
        return concat<double>({narrow(in[0], 1, 1, 2), in[1]}, 1);
      },
      rng));
  cases.push_back(projected_case(
      "reshape", {uniform({2, 6}, rng, -1, 1)}, {3, 4},
      [](const TensorList<double>& in) { return in[0].reshape({3, 4}); }, rng));
  cases.push_back(projected_case(
      "shift_columns", {uniform({2, 3, 5}, rng, -1, 1)}, {2, 3, 5},
      [](const TensorList<double>& in) {
        return add(shift_columns(in[0], 2), shift_columns(in[0], -1));
      },
      rng));

  // Convolutions.
  {
    const auto spec = ConvSpec::same(2, 2, 3, 3);
    cases.push_back(projected_case(
        "conv2d", {uniform({1, 2, 5, 5}, rng, -1, 1), uniform(spec.weight_shape(), rng, -1, 1),
                   uniform({3}, rng, -1, 1)},
        {1, 3, 5, 5},
        [spec](const TensorList<double>& in) { return conv2d(in[0], in[1], in[2], spec); }, rng));
  }
  {
    const auto spec = ConvSpec::same(2, 2, 2, 5, 2);
    cases.push_back(projected_case(
        "conv2d_stride2", {uniform({1, 2, 6, 6}, rng, -1, 1),
                           uniform(spec.weight_shape(), rng, -1, 1), uniform({2}, rng, -1, 1)},
        {1, 2, 3, 3},
        [spec](const TensorList<double>& in) { return conv2d(in[0], in[1], in[2], spec); }, rng));
  }
  {
    const auto spec = ConvSpec::same(3, 2, 2, 3);
    cases.push_back(projected_case(
        "conv3d", {uniform({1, 2, 4, 4, 4}, rng, -1, 1), uniform(spec.weight_shape(), rng, -1, 1),
                   uniform({2}, rng, -1, 1)},
        {1, 2, 4, 4, 4},
        [spec](const TensorList<double>& in) { return conv3d(in[0], in[1], in[2], spec); }, rng));
  }
  {
    const auto spec = ConvSpec::same(3, 2, 3, 3, 2);
    cases.push_back(projected_case(
        "conv3d_stride2", {uniform({1, 2, 4, 4, 4}, rng, -1, 1),
                           uniform(spec.weight_shape(), rng, -1, 1), uniform({3}, rng, -1, 1)},
        {1, 3, 2, 2, 2},
        [spec](const TensorList<double>& in) { return conv3d(in[0], in[1], in[2], spec); }, rng));
  }
  {
    const auto spec = ConvSpec::same(3, 3, 2, 3, 2);
    Shape wshape = spec.weight_shape();
    std::swap(wshape[0], wshape[1]);
    cases.push_back(projected_case(
        "conv_transpose3d", {uniform({1, 3, 2, 2, 2}, rng, -1, 1), uniform(wshape, rng, -1, 1),
                             uniform({2}, rng, -1, 1)},
        {1, 2, 4, 4, 4},
        [spec](const TensorList<double>& in) {
          return conv_transpose3d(in[0], in[1], in[2], spec, {4, 4, 4});
        },
        rng));
  }

  // Normalization, pooling, filtering.
  cases.push_back(projected_case(
      "batch_norm_train",
      {uniform({1, 3, 3, 4}, rng, -1, 1), uniform({3}, rng, 0.5, 1.5), uniform({3}, rng, -1, 1)},
      {1, 3, 3, 4},
      [](const TensorList<double>& in) {
        RunningStats<double> stats(3);
        return batch_norm(in[0], in[1], in[2], &stats, NormMode::kTraining);
      },
      rng));
  {
    RunningStats<double> stats(2);
    stats.mean = uniform({2}, rng, -0.5, 0.5);
    stats.var = uniform({2}, rng, 0.5, 2.0);
    cases.push_back(projected_case(
        "batch_norm_eval",
        {uniform({1, 2, 2, 2, 3}, rng, -1, 1), uniform({2}, rng, 0.5, 1.5),
         uniform({2}, rng, -1, 1)},
        {1, 2, 2, 2, 3},
        [stats](const TensorList<double>& in) {
          auto s = stats;
          return batch_norm(in[0], in[1], in[2], &s, NormMode::kEval);
        },
        rng));
  }
  cases.push_back(projected_case(
      "avg_pool2x", {uniform({1, 2, 4, 6}, rng, -1, 1)}, {1, 2, 2, 3},
      [](const TensorList<double>& in) { return avg_pool2x(in[0]); }, rng));
  cases.push_back(projected_case(
      "upsample2x", {uniform({1, 2, 2, 3}, rng, -1, 1)}, {1, 2, 4, 6},
      [](const TensorList<double>& in) { return upsample2x(in[0]); }, rng));
  cases.push_back(projected_case(
      "box_filter", {uniform({2, 5, 6}, rng, -1, 1)}, {2, 3, 4},
      [](const TensorList<double>& in) { return box_filter(in[0], 3); }, rng));
  {
    std::mt19937_64 block_rng(seed + 11);
    auto block = std::make_shared<ResidualBlock<double>>("res", 2, 3, block_rng, true,
                                                         BlockOrder::kReluThenNorm);
    cases.push_back(projected_case(
        "residual_block", {uniform({1, 3, 4, 4}, rng, -1, 1)}, {1, 3, 4, 4},
        [block](const TensorList<double>& in) { return (*block)(in[0], NormMode::kTraining); },
        rng));
  }

  // Sampling and disparity regression.
  cases.push_back(projected_case(
      "bilinear_sample", {uniform({2, 4, 5}, rng, 0, 1), fractional_grid(3, 4, 4, 5, rng)},
      {2, 3, 4},
      [](const TensorList<double>& in) { return bilinear_sample(in[0], in[1]); }, rng));
  {
    // Disparities in (0.1, 0.9) keep every sample between the same two columns.
    cases.push_back(projected_case(
        "warp_stereo", {uniform({3, 4, 8}, rng, 0, 1), uniform({1, 4, 8}, rng, 0.1, 0.9)},
        {3, 4, 8},
        [](const TensorList<double>& in) {
          return add(warp_stereo(in[0], in[1], StereoSide::kLeft),
                     warp_stereo(in[0], in[1], StereoSide::kRight));
        },
        rng));
  }
  {
    const auto hyps = DisparityHypotheses::linear(5, 0.0, 8.0);
    cases.push_back(projected_case(
        "soft_argmin", {uniform({5, 3, 4}, rng, -2, 2)}, {1, 3, 4},
        [hyps](const TensorList<double>& in) { return soft_argmin(in[0], hyps); }, rng));
  }

  // Losses.
  for (Index window : {3, 5, 7}) {
    cases.push_back(projected_case(
        "ssim_" + std::to_string(window),
        {uniform({2, 8, 9}, rng, 0, 1), uniform({2, 8, 9}, rng, 0, 1)},
        {2, 8 - window + 1, 9 - window + 1},
        [window](const TensorList<double>& in) { return ssim_map(in[0], in[1], window); }, rng));
  }
  {
    T64 mask({1, 8, 8}, 1.0);
    for (Index i = 0; i < 16; ++i) mask[3 * i + 1] = 0.0;
    cases.push_back(scalar_case(
        "dssim_masked", {uniform({3, 8, 8}, rng, 0, 1), uniform({3, 8, 8}, rng, 0, 1)},
        [mask](const TensorList<double>& in) { return dssim(in[0], in[1], 5, &mask); }));
    cases.push_back(scalar_case(
        "masked_l1", {uniform({3, 8, 8}, rng, 0, 1), uniform({3, 8, 8}, rng, 0, 1)},
        [mask](const TensorList<double>& in) { return masked_l1(in[0], in[1], &mask); }));
  }
  cases.push_back(scalar_case(
      "photometric_loss",
      {uniform({3, 8, 8}, rng, 0, 1), uniform({3, 8, 8}, rng, 0, 1),
       uniform({3, 8, 8}, rng, 0, 1), uniform({3, 8, 8}, rng, 0, 1)},
      [](const TensorList<double>& in) {
        return photometric_loss(in[0], in[1], in[2], in[3], LossWeights{});
      }));
  cases.push_back(scalar_case(
      "lr_consistency_loss", {uniform({1, 5, 12}, rng, 1.1, 1.9), uniform({1, 5, 12}, rng, 1.1, 1.9)},
      [](const TensorList<double>& in) { return lr_consistency_loss(in[0], in[1]); }));
  {
    // Image terms enter the smoothness weights as constants.
    const T64 image = uniform({3, 6, 7}, rng, 0, 1);
    cases.push_back(scalar_case(
        "smoothness_loss", {uniform({1, 6, 7}, rng, 0, 4)},
        [image](const TensorList<double>& in) { return smoothness_loss(in[0], image); }));
  }
  cases.push_back(scalar_case(
      "total_loss",
      {uniform({}, rng, 0, 1), uniform({}, rng, 0, 1), uniform({}, rng, 0, 1)},
      [](const TensorList<double>& in) { return total_loss(in[0], in[1], in[2], LossWeights{}); }));
  cases.push_back(scalar_case(
      "inpaint_loss", {uniform({3, 4, 4}, rng, 0, 1), uniform({3, 4, 4}, rng, 0, 1)},
      [](const TensorList<double>& in) { return inpaint_loss(in[0], in[1]); }));
  {
    const T64 left = uniform({3, 8, 16}, rng, 0, 1);
    const T64 right = uniform({3, 8, 16}, rng, 0, 1);
    cases.push_back(scalar_case(
        "stereo_objective",
        {uniform({1, 8, 16}, rng, 1.1, 1.9), uniform({1, 8, 16}, rng, 1.1, 1.9)},
        [left, right](const TensorList<double>& in) {
          return stereo_objective(left, right, in[0], in[1], LossWeights{}).total;
        }));
  }

  // Small inpainting network (one view, narrow widths).
  {
    InpaintNetConfig cfg;
    cfg.views = 1;
    cfg.width = 4;
    cfg.mid_width = 8;
    cfg.head_width = 4;
    auto net = std::make_shared<InpaintNet<double>>(cfg, seed + 5);
    cases.push_back(projected_case(
        "inpaint_net", {uniform({4, 4, 4}, rng, 0, 1)}, {3, 4, 4},
        [net](const TensorList<double>& in) { return net->forward(in[0]); }, rng));
  }
  return cases;
}

GradCase pipeline_case(std::uint64_t seed) {
  DepthNetConfig cfg;
  cfg.hypotheses = 4;
  cfg.max_disparity = 3.0;
  auto net = std::make_shared<DepthNet<double>>(cfg, seed);
  std::mt19937_64 rng(seed + 17);
  const T64 left = uniform({3, 16, 16}, rng, 0, 1);
  const T64 right = uniform({3, 16, 16}, rng, 0, 1);

  // Probe 50 parameters drawn uniformly from the concatenated parameter vector.
  const auto params = net->parameters();
  const Index total = parameter_count(params);
  std::vector<Index> picks(static_cast<std::size_t>(total));
  std::iota(picks.begin(), picks.end(), Index{0});
  std::shuffle(picks.begin(), picks.end(), rng);
  picks.resize(50);
  std::sort(picks.begin(), picks.end());

  // Each probed scalar becomes an input; the closure writes it into the
  // network before every evaluation and routes the gradient back out.
  struct Probe {
    std::size_t tensor;
    Index index;
  };
  std::vector<Probe> probes;
  TensorList<double> inputs;
  {
    std::size_t t = 0;
    Index offset = 0;
    for (Index p : picks) {
      while (p >= offset + params[t].tensor.numel()) offset += params[t++].tensor.numel();
      probes.push_back({t, p - offset});
      inputs.push_back(T64::scalar(params[t].tensor[p - offset]));
    }
  }

  GradCase c;
  c.name = "depth_pipeline";
  c.tolerance = 1e-3;
  c.step = 1e-7;
  c.inputs = inputs;
  c.fn = [net, params, probes, left, right](const TensorList<double>& in) {
    auto ps = params;
    for (auto& p : ps) p.tensor.zero_grad();
    for (std::size_t i = 0; i < probes.size(); ++i) {
      ps[probes[i].tensor].tensor[probes[i].index] = in[i][0];
    }
    const auto d = net->predict(left, right);
    const T64 loss = stereo_objective(left, right, d.left, d.right, LossWeights{}).total;
    if (!grad_enabled()) return loss;
    // The returned node carries the loss value and depends only on the probed
    // scalars; its backward runs the network's own pass and copies out the
    // probed parameters' gradients.
    return T64::make_result(loss.shape(), loss.values(), in,
                            [loss, ps, probes, in](const auto& g) {
                              loss.backward();
                              for (std::size_t i = 0; i < probes.size(); ++i) {
                                const auto& t = ps[probes[i].tensor].tensor;
                                if (auto* s = in[i].grad_sink()) {
                                  (*s)[0] += g[0] * t.grad()[probes[i].index];
                                }
                              }
                            });
  };
  return c;
}

GradCase corrupted_case() {
  std::mt19937_64 rng(3);
  return scalar_case("corrupted_square", {uniform({2, 3}, rng, 0.5, 1.0)},
                     [](const TensorList<double>& in) { return sum(corrupted_square(in[0])); });
}

std::vector<GradResult> run_gradchecks(const std::vector<GradCase>& cases,
                                       const std::string& filter,
                                       const GradCheckOptions& options) {
  std::vector<GradResult> out;
  for (const auto& c : cases) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    out.push_back(check_gradients(c, options));
  }
  return out;
}

void print_results(std::ostream& out, const std::vector<GradResult>& results) {
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "gradcheck,%s,%.3e,%.0e,%lld,%s", r.name.c_str(),
                  r.max_rel_error, r.tolerance, static_cast<long long>(r.checked),
                  r.passed ? "PASS" : "FAIL");
    out << buf;
    if (!r.error.empty()) out << ",error: " << r.error;
    out << "\n";
  }
}

}  // namespace svs
