#pragma once

// Dense n-dimensional tensor with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a shared node. Ops build a graph of nodes
// whose backward closures push gradients into their inputs; backward() on a
// scalar walks that graph in reverse topological order. Element type is a
// template parameter: float for training, double for gradient checking.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace svs {

using Index = std::int64_t;
using Shape = std::vector<Index>;

/// Thrown when operand shapes do not satisfy an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference, optimizer updates).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;

  Shape shape;
  Array value;
  Array grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Array&)> backward;  // receives this node's grad

  bool is_leaf() const { return !backward; }
  Array& grad_buffer() {
    if (grad.size() != value.size()) grad = Array::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
  using BackwardFn = std::function<void(const Array&)>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, Array values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  /// Extent of dimension i; negative i counts from the back.
  Index dim(int i) const;
  Index numel() const { return node_->value.size(); }

  const Array& values() const { return node_->value; }
  /// Mutable access. Only safe on tensors that no live graph has captured.
  Array& values() { return node_->value; }
  const T* data() const { return node_->value.data(); }
  T* data() { return node_->value.data(); }
  T operator[](Index i) const { return node_->value[i]; }
  T& operator[](Index i) { return node_->value[i]; }
  /// Row-major multi-index access.
  T at(std::initializer_list<Index> idx) const;
  T& at(std::initializer_list<Index> idx);
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& requires_grad_(bool on = true);
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  const Array& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0); }

  /// Fresh leaf holding a copy of the values and no graph.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape(), values().template cast<U>());
  }

  /// Accumulates d(this)/d(leaf) into every reachable leaf's grad.
  void backward() const;

  /// Gradient buffer to accumulate into, or nullptr if this tensor does not
  /// participate in differentiation. Used by op implementations.
  Array* grad_sink() const {
    return requires_grad() ? &node_->grad_buffer() : nullptr;
  }

  /// Builds the result of a differentiable op. When grad mode is off or no
  /// input requires grad, the result is a plain leaf.
  static Tensor make_result(Shape shape, Array value,
                            std::initializer_list<Tensor> inputs,
                            BackwardFn backward);
  static Tensor make_result(Shape shape, Array value,
                            const std::vector<Tensor>& inputs,
                            BackwardFn backward);

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  Index flat_index(std::initializer_list<Index> idx) const;

  std::shared_ptr<detail::Node<T>> node_;
};

template <typename T>
using TensorList = std::vector<Tensor<T>>;

// ---------------------------------------------------------------------------
// Elementwise arithmetic (operands must have identical shapes).

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T> Tensor<T> neg(const Tensor<T>& a) { return scale(a, T(-1)); }
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
/// Gradient passes where lo < a < hi and is zero elsewhere.
template <typename T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, T s) { return scale(a, s); }
template <typename T> Tensor<T> operator*(T s, const Tensor<T>& a) { return scale(a, s); }
template <typename T> Tensor<T> operator+(const Tensor<T>& a, T s) { return add_scalar(a, s); }
template <typename T> Tensor<T> operator+(T s, const Tensor<T>& a) { return add_scalar(a, s); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, T s) { return add_scalar(a, -s); }
template <typename T> Tensor<T> operator-(T s, const Tensor<T>& a) { return add_scalar(neg(a), s); }

// ---------------------------------------------------------------------------
// Reductions.

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Mean over one dimension, kept with extent 1.
template <typename T> Tensor<T> mean_dim(const Tensor<T>& a, int dim);

// ---------------------------------------------------------------------------
// Shape manipulation.

/// Slice [start, start + length) along dim.
template <typename T> Tensor<T> narrow(const Tensor<T>& a, int dim, Index start, Index length);
/// Concatenate along dim; all other extents must agree.
template <typename T> Tensor<T> concat(const TensorList<T>& parts, int dim);

}  // namespace svs
