#pragma once

#include "svs/tensor.hpp"

#include <random>

namespace svs::test {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  return (a.values() - b.values()).abs().maxCoeff();
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  return static_cast<double>((a.values() * b.values()).sum());
}

template <typename T>
bool bit_identical(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && (a.values() == b.values()).all();
}

}  // namespace svs::test
