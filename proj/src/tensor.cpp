#include "svs/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace svs {

namespace {
thread_local bool g_grad_enabled = true;

int normalize_dim(int dim, int rank) {
  const int d = dim < 0 ? dim + rank : dim;
  if (d < 0 || d >= rank) {
    throw ShapeError("dimension " + std::to_string(dim) + " out of range for rank " +
                     std::to_string(rank));
  }
  return d;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Splits a shape around dim into (outer, extent, inner) for strided loops.
struct Split {
  Index outer = 1, extent = 1, inner = 1;
};

Split split_at(const Shape& s, int dim) {
  Split r;
  for (int i = 0; i < dim; ++i) r.outer *= s[i];
  r.extent = s[dim];
  for (std::size_t i = dim + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}
}  // namespace

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + to_string(shape));
  }
  node_->value = Array::Constant(svs::numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, Array values) : node_(std::make_shared<detail::Node<T>>()) {
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("non-positive extent in shape " + to_string(shape));
  }
  if (svs::numel(shape) != values.size()) {
    throw ShapeError("shape " + to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  node_->value = std::move(values);
  node_->shape = std::move(shape);
}

template <typename T>
Index Tensor<T>::dim(int i) const {
  return node_->shape[normalize_dim(i, rank())];
}

template <typename T>
Index Tensor<T>::flat_index(std::initializer_list<Index> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw ShapeError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                     std::to_string(rank()));
  }
  Index flat = 0;
  int d = 0;
  for (Index i : idx) {
    if (i < 0 || i >= node_->shape[d]) throw ShapeError("index out of range");
    flat = flat * node_->shape[d] + i;
    ++d;
  }
  return flat;
}

template <typename T>
T Tensor<T>::at(std::initializer_list<Index> idx) const {
  return node_->value[flat_index(idx)];
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<Index> idx) {
  return node_->value[flat_index(idx)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T>& Tensor<T>::requires_grad_(bool on) {
  node_->requires_grad = on;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), values());
}

template <typename T>
Tensor<T> Tensor<T>::reshape(Shape new_shape) const {
  if (svs::numel(new_shape) != numel()) {
    throw ShapeError("reshape " + to_string(shape()) + " -> " + to_string(new_shape));
  }
  auto self = *this;
  return make_result(std::move(new_shape), values(), {self},
                     [self](const Array& g) {
                       if (auto* s = self.grad_sink()) *s += g;
                     });
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, Array value,
                                 std::initializer_list<Tensor> inputs,
                                 BackwardFn backward) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor>(inputs),
                     std::move(backward));
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, Array value, const std::vector<Tensor>& inputs,
                                 BackwardFn backward) {
  Tensor out(std::move(shape), std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  for (const auto& in : inputs) {
    if (in.requires_grad()) out.node_->parents.push_back(in.node_);
  }
  out.node_->backward = std::move(backward);
  return out;
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " + to_string(shape()));
  }
  if (!requires_grad()) return;

  using NodeT = detail::Node<T>;
  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      NodeT* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are recomputed per pass; leaf gradients accumulate.
  for (NodeT* n : order) {
    if (!n->is_leaf()) n->grad = Array::Zero(n->value.size());
  }
  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (!n->is_leaf()) n->backward(n->grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  return Tensor<T>::make_result(a.shape(), a.values() + b.values(), {a, b},
                                [a, b](const auto& g) {
                                  if (auto* s = a.grad_sink()) *s += g;
                                  if (auto* s = b.grad_sink()) *s += g;
                                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  return Tensor<T>::make_result(a.shape(), a.values() - b.values(), {a, b},
                                [a, b](const auto& g) {
                                  if (auto* s = a.grad_sink()) *s += g;
                                  if (auto* s = b.grad_sink()) *s -= g;
                                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  return Tensor<T>::make_result(a.shape(), a.values() * b.values(), {a, b},
                                [a, b](const auto& g) {
                                  if (auto* s = a.grad_sink()) *s += g * b.values();
                                  if (auto* s = b.grad_sink()) *s += g * a.values();
                                });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "div");
  return Tensor<T>::make_result(
      a.shape(), a.values() / b.values(), {a, b}, [a, b](const auto& g) {
        if (auto* s = a.grad_sink()) *s += g / b.values();
        if (auto* s = b.grad_sink()) *s -= g * a.values() / b.values().square();
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  return Tensor<T>::make_result(a.shape(), a.values() * k, {a}, [a, k](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g * k;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T k) {
  return Tensor<T>::make_result(a.shape(), a.values() + k, {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g;
  });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return Tensor<T>::make_result(a.shape(), a.values().abs(), {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) {
      const auto& v = a.values();
      *s += g * ((v > T(0)).template cast<T>() - (v < T(0)).template cast<T>());
    }
  });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  typename Tensor<T>::Array e = a.values().exp();
  return Tensor<T>::make_result(a.shape(), e, {a}, [a, e](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g * e;
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return Tensor<T>::make_result(a.shape(), a.values().square(), {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) *s += T(2) * g * a.values();
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return Tensor<T>::make_result(a.shape(), a.values().max(T(0)), {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g * (a.values() > T(0)).template cast<T>();
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  typename Tensor<T>::Array y = T(1) / (T(1) + (-a.values()).exp());
  return Tensor<T>::make_result(a.shape(), y, {a}, [a, y](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g * y * (T(1) - y);
  });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  return Tensor<T>::make_result(
      a.shape(), a.values().max(lo).min(hi), {a}, [a, lo, hi](const auto& g) {
        if (auto* s = a.grad_sink()) {
          const auto& v = a.values();
          *s += g * ((v > lo) && (v < hi)).template cast<T>();
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  typename Tensor<T>::Array v(1);
  v[0] = a.values().sum();
  return Tensor<T>::make_result(Shape{}, v, {a}, [a](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T n = static_cast<T>(a.numel());
  typename Tensor<T>::Array v(1);
  v[0] = a.values().sum() / n;
  return Tensor<T>::make_result(Shape{}, v, {a}, [a, n](const auto& g) {
    if (auto* s = a.grad_sink()) *s += g[0] / n;
  });
}

template <typename T>
Tensor<T> mean_dim(const Tensor<T>& a, int dim) {
  const int d = normalize_dim(dim, a.rank());
  const Split sp = split_at(a.shape(), d);
  Shape out_shape = a.shape();
  out_shape[d] = 1;
  typename Tensor<T>::Array out = Tensor<T>::Array::Zero(sp.outer * sp.inner);
  const T inv = T(1) / static_cast<T>(sp.extent);
  const T* src = a.data();
  for (Index o = 0; o < sp.outer; ++o)
    for (Index e = 0; e < sp.extent; ++e)
      for (Index i = 0; i < sp.inner; ++i)
        out[o * sp.inner + i] += src[(o * sp.extent + e) * sp.inner + i] * inv;
  return Tensor<T>::make_result(out_shape, out, {a}, [a, sp, inv](const auto& g) {
    if (auto* s = a.grad_sink()) {
      for (Index o = 0; o < sp.outer; ++o)
        for (Index e = 0; e < sp.extent; ++e)
          for (Index i = 0; i < sp.inner; ++i)
            (*s)[(o * sp.extent + e) * sp.inner + i] += g[o * sp.inner + i] * inv;
    }
  });
}

// ---------------------------------------------------------------------------
// Shape ops.

template <typename T>
Tensor<T> narrow(const Tensor<T>& a, int dim, Index start, Index length) {
  const int d = normalize_dim(dim, a.rank());
  if (start < 0 || length <= 0 || start + length > a.shape()[d]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside extent " +
                     std::to_string(a.shape()[d]));
  }
  const Split sp = split_at(a.shape(), d);
  Shape out_shape = a.shape();
  out_shape[d] = length;
  typename Tensor<T>::Array out(numel(out_shape));
  const T* src = a.data();
  for (Index o = 0; o < sp.outer; ++o) {
    out.segment(o * length * sp.inner, length * sp.inner) =
        Eigen::Map<const typename Tensor<T>::Array>(
            src + (o * sp.extent + start) * sp.inner, length * sp.inner);
  }
  return Tensor<T>::make_result(out_shape, out, {a}, [a, sp, start, length](const auto& g) {
    if (auto* s = a.grad_sink()) {
      for (Index o = 0; o < sp.outer; ++o) {
        s->segment((o * sp.extent + start) * sp.inner, length * sp.inner) +=
            g.segment(o * length * sp.inner, length * sp.inner);
      }
    }
  });
}

template <typename T>
Tensor<T> concat(const TensorList<T>& parts, int dim) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int d = normalize_dim(dim, parts[0].rank());
  Shape out_shape = parts[0].shape();
  out_shape[d] = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (static_cast<int>(probe.size()) != parts[0].rank()) throw ShapeError("concat: rank mismatch");
    probe[d] = parts[0].shape()[d];
    if (probe != parts[0].shape()) {
      throw ShapeError("concat: incompatible shapes " + to_string(parts[0].shape()) + " and " +
                       to_string(p.shape()));
    }
    out_shape[d] += p.shape()[d];
  }
  const Split whole = split_at(out_shape, d);
  typename Tensor<T>::Array out(numel(out_shape));
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& p : parts) {
    const Split sp = split_at(p.shape(), d);
    for (Index o = 0; o < sp.outer; ++o) {
      out.segment((o * whole.extent + offset) * whole.inner, sp.extent * sp.inner) =
          p.values().segment(o * sp.extent * sp.inner, sp.extent * sp.inner);
    }
    offsets.push_back(offset);
    offset += sp.extent;
  }
  return Tensor<T>::make_result(out_shape, out, parts, [parts, offsets, whole, d](const auto& g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto* s = parts[k].grad_sink();
      if (!s) continue;
      const Split sp = split_at(parts[k].shape(), d);
      for (Index o = 0; o < sp.outer; ++o) {
        s->segment(o * sp.extent * sp.inner, sp.extent * sp.inner) +=
            g.segment((o * whole.extent + offsets[k]) * whole.inner, sp.extent * sp.inner);
      }
    }
  });
}

// ---------------------------------------------------------------------------

#define SVS_INSTANTIATE(T)                                                      \
  template class Tensor<T>;                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                           \
  template Tensor<T> abs(const Tensor<T>&);                                     \
  template Tensor<T> exp(const Tensor<T>&);                                     \
  template Tensor<T> square(const Tensor<T>&);                                  \
  template Tensor<T> relu(const Tensor<T>&);                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                 \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                             \
  template Tensor<T> sum(const Tensor<T>&);                                     \
  template Tensor<T> mean(const Tensor<T>&);                                    \
  template Tensor<T> mean_dim(const Tensor<T>&, int);                           \
  template Tensor<T> narrow(const Tensor<T>&, int, Index, Index);               \
  template Tensor<T> concat(const TensorList<T>&, int);

SVS_INSTANTIATE(float)
SVS_INSTANTIATE(double)

}  // namespace svs
