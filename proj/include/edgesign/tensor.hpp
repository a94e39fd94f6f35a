#pragma once

// Dense tensors with reverse-mode automatic differentiation.
//
// Tensors are shared handles onto tape nodes; every differentiable op links
// its output to its inputs so backward() can replay the tape in reverse
// creation order. Storage is the template parameter T (float in production,
// double in gradient checks); reductions always accumulate in double.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace edgesign {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

namespace detail {

inline std::uint64_t next_tensor_id() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

inline int& no_grad_depth() {
  thread_local int depth = 0;
  return depth;
}

}  // namespace detail

inline bool grad_enabled() { return detail::no_grad_depth() == 0; }

// Scoped switch that turns tape recording off (forward-only evaluation).
struct NoGradGuard {
  NoGradGuard() { ++detail::no_grad_depth(); }
  ~NoGradGuard() { --detail::no_grad_depth(); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily, only while a backward pass needs it
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backprop;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from_vector(std::move(shape), {}, true);
  }

  static Tensor full(Shape shape, T fill) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), fill);
    t.node_->id = detail::next_tensor_id();
    return t;
  }

  static Tensor from_vector(Shape shape, std::vector<T> data,
                            bool zero_fill = false) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = std::move(shape);
    const std::size_t n = shape_numel(t.node_->shape);
    if (zero_fill) {
      t.node_->value.assign(n, T(0));
    } else {
      if (data.size() != n) {
        throw TensorError("from_vector: data size " +
                          std::to_string(data.size()) +
                          " does not match shape " +
                          shape_to_string(t.node_->shape));
      }
      t.node_->value = std::move(data);
    }
    t.node_->id = detail::next_tensor_id();
    return t;
  }

  static Tensor scalar(T v) { return from_vector({1}, {v}); }

  // Standard-normal init; draws in double so float/double instantiations
  // consume the RNG stream identically.
  static Tensor randn(Shape shape, std::mt19937& rng, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.node_->value) v = static_cast<T>(dist(rng));
    return t;
  }

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return node()->shape; }
  std::size_t numel() const { return node()->value.size(); }
  std::size_t ndim() const { return node()->shape.size(); }

  std::size_t rows() const {
    require_2d("rows");
    return node()->shape[0];
  }
  std::size_t cols() const {
    require_2d("cols");
    return node()->shape[1];
  }

  std::span<const T> values() const { return node()->value; }
  std::span<T> values_mut() { return node()->value; }

  T item() const {
    if (numel() != 1) {
      throw TensorError("item: tensor has shape " + shape_to_string(shape()));
    }
    return node()->value[0];
  }

  T at(std::size_t i) const { return node()->value.at(i); }
  T at(std::size_t i, std::size_t j) const {
    require_2d("at");
    return node()->value.at(i * node()->shape[1] + j);
  }

  bool requires_grad() const { return node()->requires_grad; }

  Tensor& set_requires_grad(bool v) {
    if (v && node()->backprop) {
      throw TensorError("set_requires_grad: only leaf tensors can be marked");
    }
    node()->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return node()->grad.size() == numel(); }

  std::span<const T> grad() const {
    if (!has_grad()) throw TensorError("grad: no gradient populated");
    return node()->grad;
  }

  void zero_grad() {
    if (has_grad()) std::fill(node()->grad.begin(), node()->grad.end(), T(0));
  }

  void clear_grad() { node()->grad.clear(); }

  // Value copy detached from the tape.
  Tensor detach() const {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>();
    t.node_->shape = node()->shape;
    t.node_->value = node()->value;
    t.node_->id = detail::next_tensor_id();
    return t;
  }

  std::shared_ptr<TensorNode<T>>& node_ptr() { return node_; }
  const std::shared_ptr<TensorNode<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;

  TensorNode<T>* node() const {
    if (!node_) throw TensorError("use of undefined tensor");
    return node_.get();
  }

  void require_2d(const char* what) const {
    if (node()->shape.size() != 2) {
      throw TensorError(std::string(what) + ": tensor is not 2-d, shape " +
                        shape_to_string(shape()));
    }
  }
};

namespace detail {

template <typename T>
void check_finite(const char* op, const std::vector<T>& v) {
  for (const T& x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw TensorError(std::string(op) + ": non-finite value in output");
    }
  }
}

template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> value,
                  std::vector<Tensor<T>> inputs,
                  std::function<void(TensorNode<T>&)> backprop) {
  check_finite(op, value);
  Tensor<T> out = Tensor<T>::from_vector(std::move(shape), std::move(value));
  bool tracked = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) tracked = tracked || in.requires_grad();
  }
  if (tracked) {
    auto& node = *out.node_ptr();
    node.requires_grad = true;
    for (auto& in : inputs) {
      if (in.requires_grad()) node.parents.push_back(in.node_ptr());
    }
    node.backprop = std::move(backprop);
  }
  return out;
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a,
                        const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw TensorError(std::string(op) + ": shape mismatch " +
                      shape_to_string(a.shape()) + " vs " +
                      shape_to_string(b.shape()));
  }
}

template <typename T>
void accumulate(TensorNode<T>& dst, std::size_t index, T amount) {
  dst.grad[index] += amount;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a, b);
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) + b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "add", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += y.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            bn->grad[i] += y.grad[i];
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("sub", a, b);
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) - b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "sub", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += y.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            bn->grad[i] -= y.grad[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a, b);
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) * b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "mul", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += y.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            bn->grad[i] += y.grad[i] * an->value[i];
        }
      });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("div", a, b);
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) / b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "div", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += y.grad[i] / bn->value[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            bn->grad[i] -= y.grad[i] * y.value[i] / bn->value[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Scalar-constant and scalar-tensor ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, double c) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(a.at(i) + c);
  auto an = a.node_ptr();
  return detail::make_op<T>("add_scalar", a.shape(), std::move(out), {a},
                            [an](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < y.grad.size(); ++i)
                                an->grad[i] += y.grad[i];
                            });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, double c) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(a.at(i) * c);
  auto an = a.node_ptr();
  return detail::make_op<T>("mul_scalar", a.shape(), std::move(out), {a},
                            [an, c](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < y.grad.size(); ++i)
                                an->grad[i] += static_cast<T>(y.grad[i] * c);
                            });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, -1.0);
}

// Adds a learnable scalar (shape {1}) to every element; used for biases.
template <typename T>
Tensor<T> add_scalar_tensor(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.numel() != 1) {
    throw TensorError("add_scalar_tensor: scalar operand has shape " +
                      shape_to_string(s.shape()));
  }
  const std::size_t n = a.numel();
  const T sv = s.at(0);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i) + sv;
  auto an = a.node_ptr(), sn = s.node_ptr();
  return detail::make_op<T>(
      "add_scalar_tensor", a.shape(), std::move(out), {a, s},
      [an, sn](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += y.grad[i];
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          double acc = 0.0;
          for (std::size_t i = 0; i < y.grad.size(); ++i) acc += y.grad[i];
          sn->grad[0] += static_cast<T>(acc);
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a.at(i));
  auto an = a.node_ptr();
  return detail::make_op<T>("exp", a.shape(), std::move(out), {a},
                            [an](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < y.grad.size(); ++i)
                                an->grad[i] += y.grad[i] * y.value[i];
                            });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(a.at(i));
  auto an = a.node_ptr();
  return detail::make_op<T>("log", a.shape(), std::move(out), {a},
                            [an](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < y.grad.size(); ++i)
                                an->grad[i] += y.grad[i] / an->value[i];
                            });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(a.at(i));
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "sqrt", a.shape(), std::move(out), {a}, [an](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < y.grad.size(); ++i)
          an->grad[i] += y.grad[i] / (T(2) * y.value[i]);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.at(i);
    out[i] = static_cast<T>(x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                   : std::exp(x) / (1.0 + std::exp(x)));
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "sigmoid", a.shape(), std::move(out), {a}, [an](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < y.grad.size(); ++i)
          an->grad[i] += y.grad[i] * y.value[i] * (T(1) - y.value[i]);
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, double slope) {
  const std::size_t n = a.numel();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T x = a.at(i);
    out[i] = x >= T(0) ? x : static_cast<T>(slope * x);
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "leaky_relu", a.shape(), std::move(out), {a},
      [an, slope](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < y.grad.size(); ++i) {
          an->grad[i] += an->value[i] >= T(0)
                             ? y.grad[i]
                             : static_cast<T>(slope * y.grad[i]);
        }
      });
}

// PReLU with a single learnable slope (shape {1}) per activation site.
template <typename T>
Tensor<T> prelu(const Tensor<T>& a, const Tensor<T>& slope) {
  if (slope.numel() != 1) {
    throw TensorError("prelu: slope must be a scalar tensor, got " +
                      shape_to_string(slope.shape()));
  }
  const std::size_t n = a.numel();
  const T s = slope.at(0);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T x = a.at(i);
    out[i] = x >= T(0) ? x : s * x;
  }
  auto an = a.node_ptr(), sn = slope.node_ptr();
  return detail::make_op<T>(
      "prelu", a.shape(), std::move(out), {a, slope},
      [an, sn](TensorNode<T>& y) {
        const T s = sn->value[0];
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < y.grad.size(); ++i)
            an->grad[i] += an->value[i] >= T(0) ? y.grad[i] : s * y.grad[i];
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          double acc = 0.0;
          for (std::size_t i = 0; i < y.grad.size(); ++i) {
            if (an->value[i] < T(0)) acc += double(y.grad[i]) * an->value[i];
          }
          sn->grad[0] += static_cast<T>(acc);
        }
      });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.at(i, j);
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "transpose", {c, r}, std::move(out), {a}, [an, r, c](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            an->grad[i * c + j] += y.grad[j * r + i];
      });
}

// Concatenation along axis 0 (rows) or axis 1 (columns). 1-d tensors may be
// concatenated along axis 0 only.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw TensorError("concat: no inputs");
  const std::size_t nd = parts.front().ndim();
  if (nd == 1) {
    if (axis != 0) throw TensorError("concat: 1-d tensors require axis 0");
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (p.ndim() != 1) {
        throw TensorError("concat: rank mismatch " +
                          shape_to_string(parts.front().shape()) + " vs " +
                          shape_to_string(p.shape()));
      }
      total += p.numel();
    }
    std::vector<T> out;
    out.reserve(total);
    for (const auto& p : parts)
      out.insert(out.end(), p.values().begin(), p.values().end());
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      nodes.push_back(p.node_ptr());
      sizes.push_back(p.numel());
    }
    return detail::make_op<T>(
        "concat", {total}, std::move(out), parts,
        [nodes, sizes](TensorNode<T>& y) {
          std::size_t off = 0;
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k]->requires_grad) {
              nodes[k]->ensure_grad();
              for (std::size_t i = 0; i < sizes[k]; ++i)
                nodes[k]->grad[i] += y.grad[off + i];
            }
            off += sizes[k];
          }
        });
  }
  if (nd != 2 || (axis != 0 && axis != 1)) {
    throw TensorError("concat: expected 2-d tensors with axis 0 or 1");
  }
  std::size_t rows = parts.front().rows(), cols = parts.front().cols();
  std::size_t total_rows = 0, total_cols = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || (axis == 0 && p.cols() != cols) ||
        (axis == 1 && p.rows() != rows)) {
      throw TensorError("concat: shape mismatch " +
                        shape_to_string(parts.front().shape()) + " vs " +
                        shape_to_string(p.shape()));
    }
    total_rows += p.rows();
    total_cols += p.cols();
  }
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node_ptr());
  if (axis == 0) {
    std::vector<T> out;
    out.reserve(total_rows * cols);
    for (const auto& p : parts)
      out.insert(out.end(), p.values().begin(), p.values().end());
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) sizes.push_back(p.numel());
    return detail::make_op<T>(
        "concat", {total_rows, cols}, std::move(out), parts,
        [nodes, sizes](TensorNode<T>& y) {
          std::size_t off = 0;
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (nodes[k]->requires_grad) {
              nodes[k]->ensure_grad();
              for (std::size_t i = 0; i < sizes[k]; ++i)
                nodes[k]->grad[i] += y.grad[off + i];
            }
            off += sizes[k];
          }
        });
  }
  // axis == 1
  std::vector<T> out(rows * total_cols);
  {
    std::size_t col_off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < pc; ++j)
          out[i * total_cols + col_off + j] = p.at(i, j);
      col_off += pc;
    }
  }
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return detail::make_op<T>(
      "concat", {rows, total_cols}, std::move(out), parts,
      [nodes, widths, rows, total_cols](TensorNode<T>& y) {
        std::size_t col_off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          const std::size_t pc = widths[k];
          if (nodes[k]->requires_grad) {
            nodes[k]->ensure_grad();
            for (std::size_t i = 0; i < rows; ++i)
              for (std::size_t j = 0; j < pc; ++j)
                nodes[k]->grad[i * pc + j] +=
                    y.grad[i * total_cols + col_off + j];
          }
          col_off += pc;
        }
      });
}

// Rows [begin, end) along the first axis; works for 1-d and 2-d tensors.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const std::size_t nd = a.ndim();
  if (nd != 1 && nd != 2) throw TensorError("slice_rows: rank must be 1 or 2");
  const std::size_t n_rows = a.shape()[0];
  const std::size_t width = nd == 2 ? a.shape()[1] : 1;
  if (begin > end || end > n_rows) {
    throw TensorError("slice_rows: range [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ") out of bounds for " +
                      shape_to_string(a.shape()));
  }
  std::vector<T> out(a.values().begin() + begin * width,
                     a.values().begin() + end * width);
  Shape shape = nd == 2 ? Shape{end - begin, width} : Shape{end - begin};
  auto an = a.node_ptr();
  return detail::make_op<T>("slice_rows", std::move(shape), std::move(out),
                            {a}, [an, begin, width](TensorNode<T>& y) {
                              an->ensure_grad();
                              const std::size_t off = begin * width;
                              for (std::size_t i = 0; i < y.grad.size(); ++i)
                                an->grad[off + i] += y.grad[i];
                            });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (const T& v : a.values()) acc += v;
  auto an = a.node_ptr();
  return detail::make_op<T>("sum", {1}, {static_cast<T>(acc)}, {a},
                            [an](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (auto& g : an->grad) g += y.grad[0];
                            });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw TensorError("mean: empty tensor");
  double acc = 0.0;
  for (const T& v : a.values()) acc += v;
  const double inv = 1.0 / double(a.numel());
  auto an = a.node_ptr();
  return detail::make_op<T>("mean", {1}, {static_cast<T>(acc * inv)}, {a},
                            [an, inv](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (auto& g : an->grad)
                                g += static_cast<T>(y.grad[0] * inv);
                            });
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
    throw TensorError("matmul: incompatible shapes " +
                      shape_to_string(a.shape()) + " and " +
                      shape_to_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<T> out(n * m);
  {
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < k; ++l)
          acc += double(av[i * k + l]) * double(bv[l * m + j]);
        out[i * m + j] = static_cast<T>(acc);
      }
    }
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "matmul", {n, m}, std::move(out), {a, b},
      [an, bn, n, k, m](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < k; ++l) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j)
                acc += double(y.grad[i * m + j]) * double(bn->value[l * m + j]);
              an->grad[i * k + l] += static_cast<T>(acc);
            }
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t l = 0; l < k; ++l) {
            for (std::size_t j = 0; j < m; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < n; ++i)
                acc += double(an->value[i * k + l]) * double(y.grad[i * m + j]);
              bn->grad[l * m + j] += static_cast<T>(acc);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

// Softmax along `axis` of a 2-d tensor (1-d tensors are treated as one row).
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis = -1) {
  Tensor<T> input = a;
  bool was_1d = false;
  if (a.ndim() == 1) {
    was_1d = true;
    if (axis == -1) axis = 1;
    if (axis != 1 && axis != 0) throw TensorError("softmax: bad axis");
    axis = 1;
  } else if (a.ndim() == 2) {
    if (axis == -1) axis = 1;
    if (axis != 0 && axis != 1) throw TensorError("softmax: bad axis");
  } else {
    throw TensorError("softmax: rank must be 1 or 2");
  }
  const std::size_t r = was_1d ? 1 : a.shape()[0];
  const std::size_t c = was_1d ? a.shape()[0] : a.shape()[1];
  const bool rowwise = axis == 1;
  const std::size_t groups = rowwise ? r : c;
  const std::size_t len = rowwise ? c : r;
  auto idx = [rowwise, c](std::size_t g, std::size_t i) {
    return rowwise ? g * c + i : i * c + g;
  };
  std::vector<T> out(r * c);
  auto av = a.values();
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i)
      mx = std::max(mx, double(av[idx(g, i)]));
    double denom = 0.0;
    for (std::size_t i = 0; i < len; ++i)
      denom += std::exp(double(av[idx(g, i)]) - mx);
    for (std::size_t i = 0; i < len; ++i)
      out[idx(g, i)] =
          static_cast<T>(std::exp(double(av[idx(g, i)]) - mx) / denom);
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "softmax", a.shape(), std::move(out), {a},
      [an, groups, len, idx](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t g = 0; g < groups; ++g) {
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t p = idx(g, i);
            dot += double(y.grad[p]) * double(y.value[p]);
          }
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t p = idx(g, i);
            an->grad[p] +=
                static_cast<T>(double(y.value[p]) * (double(y.grad[p]) - dot));
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Row / segment ops (graph aggregation primitives)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a,
                      const std::vector<std::uint32_t>& indices) {
  const std::size_t nd = a.ndim();
  if (nd != 1 && nd != 2) throw TensorError("gather_rows: rank must be 1 or 2");
  const std::size_t n_rows = a.shape()[0];
  const std::size_t width = nd == 2 ? a.shape()[1] : 1;
  std::vector<T> out(indices.size() * width);
  auto av = a.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= n_rows) {
      throw TensorError("gather_rows: index " + std::to_string(indices[r]) +
                        " out of range for " + shape_to_string(a.shape()));
    }
    std::copy_n(av.begin() + std::size_t(indices[r]) * width, width,
                out.begin() + r * width);
  }
  Shape shape = nd == 2 ? Shape{indices.size(), width} : Shape{indices.size()};
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "gather_rows", std::move(shape), std::move(out), {a},
      [an, indices, width](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t r = 0; r < indices.size(); ++r) {
          const std::size_t dst = std::size_t(indices[r]) * width;
          for (std::size_t j = 0; j < width; ++j)
            an->grad[dst + j] += y.grad[r * width + j];
        }
      });
}

// Sums rows of `a` into segments. Row r belongs to segment s iff
// offsets[s] <= r < offsets[s+1]; rows must already be grouped that way.
template <typename T>
Tensor<T> segment_sum(const Tensor<T>& a,
                      const std::vector<std::size_t>& offsets) {
  if (a.ndim() != 2) throw TensorError("segment_sum: rank must be 2");
  if (offsets.empty() || offsets.back() != a.rows()) {
    throw TensorError("segment_sum: offsets do not cover all rows");
  }
  const std::size_t segments = offsets.size() - 1;
  const std::size_t width = a.cols();
  std::vector<T> out(segments * width, T(0));
  auto av = a.values();
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t j = 0; j < width; ++j) {
      double acc = 0.0;
      for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
        acc += av[r * width + j];
      out[s * width + j] = static_cast<T>(acc);
    }
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "segment_sum", {segments, width}, std::move(out), {a},
      [an, offsets, width, segments](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t s = 0; s < segments; ++s)
          for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
            for (std::size_t j = 0; j < width; ++j)
              an->grad[r * width + j] += y.grad[s * width + j];
      });
}

// Softmax over each segment of a column of logits (shape {n} or {n, 1}).
// Empty segments are allowed and produce no output rows of their own.
template <typename T>
Tensor<T> segment_softmax(const Tensor<T>& logits,
                          const std::vector<std::size_t>& offsets) {
  const std::size_t nd = logits.ndim();
  if (nd != 1 && !(nd == 2 && logits.cols() == 1)) {
    throw TensorError("segment_softmax: expected a column of logits, got " +
                      shape_to_string(logits.shape()));
  }
  const std::size_t n = logits.shape()[0];
  if (offsets.empty() || offsets.back() != n) {
    throw TensorError("segment_softmax: offsets do not cover all rows");
  }
  const std::size_t segments = offsets.size() - 1;
  std::vector<T> out(n);
  auto lv = logits.values();
  for (std::size_t s = 0; s < segments; ++s) {
    if (offsets[s] == offsets[s + 1]) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
      mx = std::max(mx, double(lv[r]));
    double denom = 0.0;
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
      denom += std::exp(double(lv[r]) - mx);
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
      out[r] = static_cast<T>(std::exp(double(lv[r]) - mx) / denom);
  }
  auto ln = logits.node_ptr();
  return detail::make_op<T>(
      "segment_softmax", logits.shape(), std::move(out), {logits},
      [ln, offsets, segments](TensorNode<T>& y) {
        ln->ensure_grad();
        for (std::size_t s = 0; s < segments; ++s) {
          double dot = 0.0;
          for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
            dot += double(y.grad[r]) * double(y.value[r]);
          for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
            ln->grad[r] +=
                static_cast<T>(double(y.value[r]) * (double(y.grad[r]) - dot));
        }
      });
}

// Multiplies row r of `a` by weights[r] (weights shape {n} or {n, 1}).
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& weights) {
  if (a.ndim() != 2) throw TensorError("scale_rows: rank must be 2");
  const std::size_t n = a.rows(), c = a.cols();
  if (weights.numel() != n) {
    throw TensorError("scale_rows: weights shape " +
                      shape_to_string(weights.shape()) + " does not match " +
                      shape_to_string(a.shape()));
  }
  std::vector<T> out(n * c);
  auto av = a.values();
  auto wv = weights.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] * wv[i];
  auto an = a.node_ptr(), wn = weights.node_ptr();
  return detail::make_op<T>(
      "scale_rows", a.shape(), std::move(out), {a, weights},
      [an, wn, n, c](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
              an->grad[i * c + j] += y.grad[i * c + j] * wn->value[i];
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              acc += double(y.grad[i * c + j]) * double(an->value[i * c + j]);
            wn->grad[i] += static_cast<T>(acc);
          }
        }
      });
}

// Normalizes each row to unit L2 norm; norms below `floor` are clamped.
template <typename T>
Tensor<T> rows_l2_normalize(const Tensor<T>& a, double floor = 1e-12) {
  if (a.ndim() != 2) throw TensorError("rows_l2_normalize: rank must be 2");
  const std::size_t n = a.rows(), c = a.cols();
  std::vector<T> out(n * c);
  std::vector<double> norms(n);
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      acc += double(av[i * c + j]) * double(av[i * c + j]);
    norms[i] = std::max(std::sqrt(acc), floor);
    for (std::size_t j = 0; j < c; ++j)
      out[i * c + j] = static_cast<T>(av[i * c + j] / norms[i]);
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "rows_l2_normalize", a.shape(), std::move(out), {a},
      [an, norms, n, c, floor](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const bool clamped = norms[i] == floor;
          double dot = 0.0;
          if (!clamped) {
            for (std::size_t j = 0; j < c; ++j)
              dot += double(y.grad[i * c + j]) * double(y.value[i * c + j]);
          }
          for (std::size_t j = 0; j < c; ++j) {
            const double g = double(y.grad[i * c + j]) -
                             (clamped ? 0.0 : dot * double(y.value[i * c + j]));
            an->grad[i * c + j] += static_cast<T>(g / norms[i]);
          }
        }
      });
}

// Row-wise dot product of two equally shaped 2-d tensors -> {n, 1}.
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("rowwise_dot", a, b);
  if (a.ndim() != 2) throw TensorError("rowwise_dot: rank must be 2");
  const std::size_t n = a.rows(), c = a.cols();
  std::vector<T> out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      acc += double(av[i * c + j]) * double(bv[i * c + j]);
    out[i] = static_cast<T>(acc);
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  return detail::make_op<T>(
      "rowwise_dot", {n, std::size_t(1)}, std::move(out), {a, b},
      [an, bn, n, c](TensorNode<T>& y) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
              an->grad[i * c + j] += y.grad[i] * bn->value[i * c + j];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
              bn->grad[i * c + j] += y.grad[i] * an->value[i * c + j];
        }
      });
}

// Diagonal of a square matrix -> {n, 1}.
template <typename T>
Tensor<T> diag(const Tensor<T>& a) {
  if (a.ndim() != 2 || a.rows() != a.cols()) {
    throw TensorError("diag: expected a square matrix, got " +
                      shape_to_string(a.shape()));
  }
  const std::size_t n = a.rows();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.at(i, i);
  auto an = a.node_ptr();
  return detail::make_op<T>("diag", {n, std::size_t(1)}, std::move(out), {a},
                            [an, n](TensorNode<T>& y) {
                              an->ensure_grad();
                              for (std::size_t i = 0; i < n; ++i)
                                an->grad[i * n + i] += y.grad[i];
                            });
}

// log(sum_j exp(a_ij)) per row -> {n, 1}. With exclude_diag (square input),
// the j == i term is left out of the sum.
template <typename T>
Tensor<T> logsumexp_rows(const Tensor<T>& a, bool exclude_diag = false) {
  if (a.ndim() != 2) throw TensorError("logsumexp_rows: rank must be 2");
  const std::size_t n = a.rows(), c = a.cols();
  if (exclude_diag && (n != c || c < 2)) {
    throw TensorError("logsumexp_rows: exclude_diag needs a square matrix "
                      "with at least 2 columns, got " +
                      shape_to_string(a.shape()));
  }
  std::vector<T> out(n);
  auto av = a.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (exclude_diag && j == i) continue;
      mx = std::max(mx, double(av[i * c + j]));
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (exclude_diag && j == i) continue;
      acc += std::exp(double(av[i * c + j]) - mx);
    }
    out[i] = static_cast<T>(mx + std::log(acc));
  }
  auto an = a.node_ptr();
  return detail::make_op<T>(
      "logsumexp_rows", {n, std::size_t(1)}, std::move(out), {a},
      [an, n, c, exclude_diag](TensorNode<T>& y) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            if (exclude_diag && j == i) continue;
            an->grad[i * c + j] += static_cast<T>(
                double(y.grad[i]) *
                std::exp(double(an->value[i * c + j]) - double(y.value[i])));
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Loss ops
// ---------------------------------------------------------------------------

// Class-weighted binary cross-entropy over a column of probabilities.
// Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs; the
// gradient is zero where the clamp is active.
template <typename T>
Tensor<T> weighted_bce(const Tensor<T>& probs, const std::vector<int>& labels,
                       double w_pos, double w_neg) {
  const std::size_t nd = probs.ndim();
  if (nd != 1 && !(nd == 2 && probs.cols() == 1)) {
    throw TensorError("weighted_bce: expected a column of probabilities");
  }
  const std::size_t n = probs.shape()[0];
  if (n == 0) throw TensorError("weighted_bce: empty batch");
  if (labels.size() != n) {
    throw TensorError("weighted_bce: " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(n) + " predictions");
  }
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  auto pv = probs.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(double(pv[i]), kLo, kHi);
    const double w = labels[i] ? w_pos : w_neg;
    acc += w * (labels[i] ? -std::log(p) : -std::log(1.0 - p));
  }
  const double inv_n = 1.0 / double(n);
  auto pn = probs.node_ptr();
  return detail::make_op<T>(
      "weighted_bce", {1}, {static_cast<T>(acc * inv_n)}, {probs},
      [pn, labels, w_pos, w_neg, inv_n](TensorNode<T>& y) {
        pn->ensure_grad();
        const double g = y.grad[0];
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const double p = double(pn->value[i]);
          if (p <= kLo || p >= kHi) continue;
          const double w = labels[i] ? w_pos : w_neg;
          const double d = labels[i] ? -1.0 / p : 1.0 / (1.0 - p);
          pn->grad[i] += static_cast<T>(g * w * d * inv_n);
        }
      });
}

// ---------------------------------------------------------------------------
// Composite helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& u, const Tensor<T>& v) {
  detail::require_same_shape("cosine_similarity", u, v);
  Tensor<T> dot = sum(mul(u, v));
  Tensor<T> nu = sqrt(sum(mul(u, u)));
  Tensor<T> nv = sqrt(sum(mul(v, v)));
  return div(dot, mul(nu, nv));
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw TensorError("backward: loss must be scalar, got shape " +
                      shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw TensorError("backward: loss does not require grad");
  }
  // Reverse order of node creation is a valid topological order: an op's
  // output is always created after its inputs.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  std::vector<TensorNode<T>*> stack{loss.node_ptr().get()};
  seen.insert(loss.node_ptr().get());
  while (!stack.empty()) {
    TensorNode<T>* cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    for (const auto& p : cur->parents) {
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const TensorNode<T>* a, const TensorNode<T>* b) {
              return a->id > b->id;
            });
  for (TensorNode<T>* node : order) node->ensure_grad();
  loss.node_ptr()->grad[0] = T(1);
  for (TensorNode<T>* node : order) {
    if (node->backprop) node->backprop(*node);
  }
}

}  // namespace edgesign
