#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "core/error.hpp"

// Dense row-major tensors with a single-owner reverse-mode tape. Ops are free
// functions; a result joins the tape whenever any input lives on one, so the
// same code paths serve plain numerics and training.

namespace i2i {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

template <typename T>
class Tape;

template <typename T>
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  Tape<T>* tape = nullptr;
  int node = -1;

  Tensor() = default;

  static Tensor zeros(Shape s) {
    Tensor t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<T>>(numel(t.shape), T(0));
    return t;
  }

  static Tensor from(Shape s, std::vector<T> values) {
    require(numel(s) == static_cast<std::int64_t>(values.size()), ErrorCode::ShapeMismatch,
            "tensor init: " + shape_str(s) + " does not hold " + std::to_string(values.size()) +
                " values");
    Tensor t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  std::int64_t size() const { return numel(shape); }
  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T item() const { return (*data)[0]; }
  bool on_tape() const { return node >= 0; }
};

template <typename T>
class Tape {
 public:
  using BackFn = std::function<void(const std::vector<T>& dout, Tape<T>& tape)>;

  // Marks a tensor as differentiable. The returned alias shares the data
  // buffer; gradients are available via grad() after backward().
  Tensor<T> leaf(const Tensor<T>& t) {
    Tensor<T> out = t;
    out.tape = this;
    out.node = add_node(t.shape, {}, nullptr);
    return out;
  }

  int add_node(const Shape& shape, std::vector<int> parents, BackFn fn) {
    nodes_.push_back(Node{shape, std::move(parents), std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void backward(const Tensor<T>& loss) {
    require(loss.tape == this && loss.on_tape(), ErrorCode::InvalidArgument,
            "backward: loss is not on this tape");
    require(loss.size() == 1, ErrorCode::InvalidArgument, "backward: loss must be scalar");
    grads_.assign(nodes_.size(), {});
    touched_.assign(nodes_.size(), false);
    grad_buffer(loss.node)[0] = T(1);
    for (int i = loss.node; i >= 0; --i) {
      if (!touched_[i] || !nodes_[i].back) continue;
      nodes_[i].back(grads_[i], *this);
    }
  }

  // Gradient buffer of a node, allocated on first touch.
  std::vector<T>& grad_buffer(int node) {
    if (grads_[node].empty()) grads_[node].assign(numel(nodes_[node].shape), T(0));
    touched_[node] = true;
    return grads_[node];
  }

  const std::vector<T>& grad(const Tensor<T>& t) {
    require(t.tape == this && t.on_tape(), ErrorCode::InvalidArgument,
            "grad: tensor is not on this tape");
    return grad_buffer(t.node);
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<int> parents;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
  std::vector<bool> touched_;
};

namespace detail {

template <typename T>
Tape<T>* joint_tape(const Tensor<T>& a) {
  return a.on_tape() ? a.tape : nullptr;
}

template <typename T>
Tape<T>* joint_tape(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.on_tape() && b.on_tape())
    require(a.tape == b.tape, ErrorCode::InvalidArgument, "operands on different tapes");
  return a.on_tape() ? a.tape : (b.on_tape() ? b.tape : nullptr);
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape == b.shape, ErrorCode::ShapeMismatch,
          std::string(op) + ": shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    out.node = tape->add_node(out.shape, {na, nb}, [na, nb](const std::vector<T>& d, Tape<T>& t) {
      if (na >= 0) {
        auto& g = t.grad_buffer(na);
        for (size_t i = 0; i < d.size(); ++i) g[i] += d[i];
      }
      if (nb >= 0) {
        auto& g = t.grad_buffer(nb);
        for (size_t i = 0; i < d.size(); ++i) g[i] += d[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] - b.ptr()[i];
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    out.node = tape->add_node(out.shape, {na, nb}, [na, nb](const std::vector<T>& d, Tape<T>& t) {
      if (na >= 0) {
        auto& g = t.grad_buffer(na);
        for (size_t i = 0; i < d.size(); ++i) g[i] += d[i];
      }
      if (nb >= 0) {
        auto& g = t.grad_buffer(nb);
        for (size_t i = 0; i < d.size(); ++i) g[i] -= d[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    auto da = a.data, db = b.data;
    out.node =
        tape->add_node(out.shape, {na, nb}, [na, nb, da, db](const std::vector<T>& d, Tape<T>& t) {
          if (na >= 0) {
            auto& g = t.grad_buffer(na);
            for (size_t i = 0; i < d.size(); ++i) g[i] += d[i] * (*db)[i];
          }
          if (nb >= 0) {
            auto& g = t.grad_buffer(nb);
            for (size_t i = 0; i < d.size(); ++i) g[i] += d[i] * (*da)[i];
          }
        });
  }
  return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "div");
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] / b.ptr()[i];
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    auto da = a.data, db = b.data;
    out.node =
        tape->add_node(out.shape, {na, nb}, [na, nb, da, db](const std::vector<T>& d, Tape<T>& t) {
          if (na >= 0) {
            auto& g = t.grad_buffer(na);
            for (size_t i = 0; i < d.size(); ++i) g[i] += d[i] / (*db)[i];
          }
          if (nb >= 0) {
            auto& g = t.grad_buffer(nb);
            for (size_t i = 0; i < d.size(); ++i)
              g[i] -= d[i] * (*da)[i] / ((*db)[i] * (*db)[i]);
          }
        });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] * c;
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    out.node = tape->add_node(out.shape, {na}, [na, c](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      for (size_t i = 0; i < d.size(); ++i) g[i] += d[i] * c;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] + c;
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    out.node = tape->add_node(out.shape, {na}, [na](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      for (size_t i = 0; i < d.size(); ++i) g[i] += d[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = a.ptr()[i] > T(0) ? a.ptr()[i] : T(0);
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    auto da = a.data;
    out.node = tape->add_node(out.shape, {na}, [na, da](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      // Subgradient at 0 is 0.
      for (size_t i = 0; i < d.size(); ++i) g[i] += (*da)[i] > T(0) ? d[i] : T(0);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sqrt_op(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::int64_t i = 0; i < a.size(); ++i) out.ptr()[i] = std::sqrt(a.ptr()[i]);
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    auto dout_data = out.data;
    out.node =
        tape->add_node(out.shape, {na}, [na, dout_data](const std::vector<T>& d, Tape<T>& t) {
          auto& g = t.grad_buffer(na);
          for (size_t i = 0; i < d.size(); ++i) g[i] += d[i] / (T(2) * (*dout_data)[i]);
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structure ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape s) {
  require(numel(s) == a.size(), ErrorCode::ShapeMismatch,
          "reshape: " + shape_str(a.shape) + " to " + shape_str(s));
  Tensor<T> out = a;
  out.shape = std::move(s);
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    out.node = tape->add_node(out.shape, {na}, [na](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      for (size_t i = 0; i < d.size(); ++i) g[i] += d[i];
    });
  }
  return out;
}

// out.flat[i] = a.flat[index[i]]; the workhorse behind gather, rotations,
// transposes and kernel assembly. Backward scatter-adds.
template <typename T>
Tensor<T> index_select(const Tensor<T>& a, std::shared_ptr<const std::vector<std::int64_t>> index,
                       Shape out_shape) {
  require(numel(out_shape) == static_cast<std::int64_t>(index->size()), ErrorCode::ShapeMismatch,
          "index_select: table size does not match output shape");
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const T* pa = a.ptr();
  T* po = out.ptr();
  for (size_t i = 0; i < index->size(); ++i) po[i] = pa[(*index)[i]];
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    out.node = tape->add_node(out.shape, {na}, [na, index](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      for (size_t i = 0; i < d.size(); ++i) g[(*index)[i]] += d[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> index_select(const Tensor<T>& a, const std::vector<std::int64_t>& index,
                       Shape out_shape) {
  return index_select(a, std::make_shared<const std::vector<std::int64_t>>(index),
                      std::move(out_shape));
}

// Rows of a 2-D tensor.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int>& rows) {
  require(a.shape.size() == 2, ErrorCode::ShapeMismatch, "gather_rows: need 2-D input");
  int cols = a.shape[1];
  std::vector<std::int64_t> idx;
  idx.reserve(rows.size() * cols);
  for (int r : rows) {
    require(r >= 0 && r < a.shape[0], ErrorCode::InvalidArgument, "gather_rows: row out of range");
    for (int c = 0; c < cols; ++c) idx.push_back(static_cast<std::int64_t>(r) * cols + c);
  }
  return index_select(a, idx, {static_cast<int>(rows.size()), cols});
}

// Rotates the trailing two axes by k*90 degrees counterclockwise, with image
// convention (row index grows downward).
template <typename T>
Tensor<T> rotate90(const Tensor<T>& a, int k) {
  require(a.shape.size() >= 2, ErrorCode::ShapeMismatch, "rotate90: need >= 2 axes");
  k = ((k % 4) + 4) % 4;
  int h = a.shape[a.shape.size() - 2];
  int w = a.shape[a.shape.size() - 1];
  std::int64_t planes = a.size() / (static_cast<std::int64_t>(h) * w);
  int oh = (k % 2 == 0) ? h : w;
  int ow = (k % 2 == 0) ? w : h;
  Shape out_shape = a.shape;
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  std::vector<std::int64_t> idx(a.size());
  for (std::int64_t p = 0; p < planes; ++p) {
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        int sr = 0, sc = 0;
        switch (k) {
          case 0: sr = r; sc = c; break;
          case 1: sr = c; sc = w - 1 - r; break;  // 90 ccw
          case 2: sr = h - 1 - r; sc = w - 1 - c; break;
          case 3: sr = h - 1 - c; sc = r; break;
        }
        idx[(p * oh + r) * ow + c] = (p * h + sr) * w + sc;
      }
    }
  }
  return index_select(a, idx, out_shape);
}

// Concatenation of 1-D tensors.
template <typename T>
Tensor<T> concat0(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), ErrorCode::InvalidArgument, "concat0: no inputs");
  int total = 0;
  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    require(p.shape.size() == 1, ErrorCode::ShapeMismatch, "concat0: need 1-D inputs");
    total += p.shape[0];
    if (p.on_tape()) {
      require(!tape || tape == p.tape, ErrorCode::InvalidArgument, "concat0: mixed tapes");
      tape = p.tape;
    }
  }
  Tensor<T> out = Tensor<T>::zeros({total});
  int at = 0;
  std::vector<int> nodes, offsets, lengths;
  for (const auto& p : parts) {
    for (int i = 0; i < p.shape[0]; ++i) out.ptr()[at + i] = p.ptr()[i];
    nodes.push_back(p.node);
    offsets.push_back(at);
    lengths.push_back(p.shape[0]);
    at += p.shape[0];
  }
  if (tape) {
    out.tape = tape;
    out.node = tape->add_node(out.shape, nodes,
                              [nodes, offsets, lengths](const std::vector<T>& d, Tape<T>& t) {
                                for (size_t p = 0; p < nodes.size(); ++p) {
                                  if (nodes[p] < 0) continue;
                                  auto& g = t.grad_buffer(nodes[p]);
                                  for (int i = 0; i < lengths[p]; ++i) g[i] += d[offsets[p] + i];
                                }
                              });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[0],
          ErrorCode::ShapeMismatch,
          "matmul: " + shape_str(a.shape) + " x " + shape_str(b.shape));
  int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<T> out = Tensor<T>::zeros({m, n});
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      T av = pa[i * k + p];
      const T* brow = pb + static_cast<std::int64_t>(p) * n;
      T* orow = po + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    auto da = a.data, db = b.data;
    out.node = tape->add_node(
        out.shape, {na, nb}, [na, nb, da, db, m, k, n](const std::vector<T>& d, Tape<T>& t) {
          if (na >= 0) {
            auto& g = t.grad_buffer(na);  // dA = dOut * B^T
            for (int i = 0; i < m; ++i)
              for (int p = 0; p < k; ++p) {
                T acc = 0;
                for (int j = 0; j < n; ++j) acc += d[i * n + j] * (*db)[p * n + j];
                g[i * k + p] += acc;
              }
          }
          if (nb >= 0) {
            auto& g = t.grad_buffer(nb);  // dB = A^T * dOut
            for (int p = 0; p < k; ++p)
              for (int i = 0; i < m; ++i) {
                T av = (*da)[i * k + p];
                for (int j = 0; j < n; ++j) g[p * n + j] += av * d[i * n + j];
              }
          }
        });
  }
  return out;
}

// y = W x + b for vector x.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.shape.size() == 1 && w.shape.size() == 2 && w.shape[1] == x.shape[0] &&
              b.shape == Shape{w.shape[0]},
          ErrorCode::ShapeMismatch,
          "linear: x" + shape_str(x.shape) + " W" + shape_str(w.shape) + " b" + shape_str(b.shape));
  int m = w.shape[0], k = w.shape[1];
  Tensor<T> out = Tensor<T>::zeros({m});
  for (int i = 0; i < m; ++i) {
    T acc = b.ptr()[i];
    const T* wrow = w.ptr() + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < k; ++j) acc += wrow[j] * x.ptr()[j];
    out.ptr()[i] = acc;
  }
  Tape<T>* tape = detail::joint_tape(x, w);
  if (!tape) tape = detail::joint_tape(b);
  if (tape) {
    out.tape = tape;
    int nx = x.node, nw = w.node, nb = b.node;
    auto dx = x.data, dw = w.data;
    out.node = tape->add_node(
        out.shape, {nx, nw, nb}, [nx, nw, nb, dx, dw, m, k](const std::vector<T>& d, Tape<T>& t) {
          if (nx >= 0) {
            auto& g = t.grad_buffer(nx);
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < k; ++j) g[j] += (*dw)[i * k + j] * d[i];
          }
          if (nw >= 0) {
            auto& g = t.grad_buffer(nw);
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < k; ++j) g[i * k + j] += d[i] * (*dx)[j];
          }
          if (nb >= 0) {
            auto& g = t.grad_buffer(nb);
            for (int i = 0; i < m; ++i) g[i] += d[i];
          }
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution and pooling

// x: (Cin, H, W), k: (Cout, Cin, kh, kw), bias: (Cout) or empty. Zero "same"
// padding (odd kernels center-aligned); output (Cout, ceil-free floor dims).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias, int stride = 1,
                 bool same_padding = true) {
  require(x.shape.size() == 3 && k.shape.size() == 4 && x.shape[0] == k.shape[1],
          ErrorCode::ShapeMismatch,
          "conv2d: x" + shape_str(x.shape) + " k" + shape_str(k.shape));
  require(stride >= 1, ErrorCode::InvalidArgument, "conv2d: stride must be >= 1");
  const int cin = x.shape[0], h = x.shape[1], w = x.shape[2];
  const int cout = k.shape[0], kh = k.shape[2], kw = k.shape[3];
  const bool has_bias = bias.data && bias.size() > 0;
  if (has_bias)
    require(bias.shape == Shape{cout}, ErrorCode::ShapeMismatch, "conv2d: bias shape");
  const int ph = same_padding ? kh / 2 : 0;
  const int pw = same_padding ? kw / 2 : 0;
  const int oh = (h + 2 * ph - kh) / stride + 1;
  const int ow = (w + 2 * pw - kw) / stride + 1;
  require(oh > 0 && ow > 0, ErrorCode::ShapeMismatch, "conv2d: empty output");

  Tensor<T> out = Tensor<T>::zeros({cout, oh, ow});
  const T* px = x.ptr();
  const T* pk = k.ptr();
  T* po = out.ptr();
  if (has_bias) {
    for (int co = 0; co < cout; ++co) {
      T bv = bias.ptr()[co];
      T* plane = po + static_cast<std::int64_t>(co) * oh * ow;
      for (int i = 0; i < oh * ow; ++i) plane[i] = bv;
    }
  }
  for (int co = 0; co < cout; ++co) {
    T* oplane = po + static_cast<std::int64_t>(co) * oh * ow;
    for (int ci = 0; ci < cin; ++ci) {
      const T* xplane = px + static_cast<std::int64_t>(ci) * h * w;
      const T* kbase = pk + ((static_cast<std::int64_t>(co) * cin + ci) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          T kv = kbase[ky * kw + kx];
          if (kv == T(0)) continue;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * stride + ky - ph;
            if (iy < 0 || iy >= h) continue;
            const T* xrow = xplane + static_cast<std::int64_t>(iy) * w;
            T* orow = oplane + static_cast<std::int64_t>(oy) * ow;
            if (stride == 1) {
              int ox_lo = std::max(0, pw - kx);
              int ox_hi = std::min(ow, w + pw - kx);
              const T* xs = xrow + (ox_lo + kx - pw);
              for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += kv * xs[ox - ox_lo];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                int ix = ox * stride + kx - pw;
                if (ix < 0 || ix >= w) continue;
                orow[ox] += kv * xrow[ix];
              }
            }
          }
        }
      }
    }
  }

  Tape<T>* tape = detail::joint_tape(x, k);
  if (!tape && has_bias) tape = detail::joint_tape(bias);
  if (tape) {
    out.tape = tape;
    int nx = x.node, nk = k.node, nb = has_bias ? bias.node : -1;
    auto dx_data = x.data, dk_data = k.data;
    out.node = tape->add_node(
        out.shape, {nx, nk, nb},
        [=](const std::vector<T>& d, Tape<T>& t) {
          if (nb >= 0) {
            auto& g = t.grad_buffer(nb);
            for (int co = 0; co < cout; ++co) {
              T acc = 0;
              const T* dplane = d.data() + static_cast<std::int64_t>(co) * oh * ow;
              for (int i = 0; i < oh * ow; ++i) acc += dplane[i];
              g[co] += acc;
            }
          }
          if (nx >= 0) {
            auto& g = t.grad_buffer(nx);
            for (int co = 0; co < cout; ++co) {
              const T* dplane = d.data() + static_cast<std::int64_t>(co) * oh * ow;
              for (int ci = 0; ci < cin; ++ci) {
                T* gplane = g.data() + static_cast<std::int64_t>(ci) * h * w;
                const T* kbase = dk_data->data() + ((static_cast<std::int64_t>(co) * cin + ci) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky)
                  for (int kx = 0; kx < kw; ++kx) {
                    T kv = kbase[ky * kw + kx];
                    if (kv == T(0)) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                      int iy = oy * stride + ky - ph;
                      if (iy < 0 || iy >= h) continue;
                      const T* drow = dplane + static_cast<std::int64_t>(oy) * ow;
                      T* grow = gplane + static_cast<std::int64_t>(iy) * w;
                      for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + kx - pw;
                        if (ix < 0 || ix >= w) continue;
                        grow[ix] += kv * drow[ox];
                      }
                    }
                  }
              }
            }
          }
          if (nk >= 0) {
            auto& g = t.grad_buffer(nk);
            for (int co = 0; co < cout; ++co) {
              const T* dplane = d.data() + static_cast<std::int64_t>(co) * oh * ow;
              for (int ci = 0; ci < cin; ++ci) {
                const T* xplane = dx_data->data() + static_cast<std::int64_t>(ci) * h * w;
                T* gbase = g.data() + ((static_cast<std::int64_t>(co) * cin + ci) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky)
                  for (int kx = 0; kx < kw; ++kx) {
                    T acc = 0;
                    for (int oy = 0; oy < oh; ++oy) {
                      int iy = oy * stride + ky - ph;
                      if (iy < 0 || iy >= h) continue;
                      const T* drow = dplane + static_cast<std::int64_t>(oy) * ow;
                      const T* xrow = xplane + static_cast<std::int64_t>(iy) * w;
                      for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * stride + kx - pw;
                        if (ix < 0 || ix >= w) continue;
                        acc += drow[ox] * xrow[ix];
                      }
                    }
                    gbase[ky * kw + kx] += acc;
                  }
              }
            }
          }
        });
  }
  return out;
}

// 2x2 average pooling; even spatial dims required. Keeps exact C4
// equivariance where strided convolution would break it.
template <typename T>
Tensor<T> avgpool2x2(const Tensor<T>& x) {
  require(x.shape.size() == 3 && x.shape[1] % 2 == 0 && x.shape[2] % 2 == 0,
          ErrorCode::ShapeMismatch, "avgpool2x2: need (C, even, even), got " + shape_str(x.shape));
  int c = x.shape[0], h = x.shape[1], w = x.shape[2];
  int oh = h / 2, ow = w / 2;
  Tensor<T> out = Tensor<T>::zeros({c, oh, ow});
  const T* px = x.ptr();
  T* po = out.ptr();
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const T* base = px + (static_cast<std::int64_t>(ci) * h + 2 * oy) * w + 2 * ox;
        po[(static_cast<std::int64_t>(ci) * oh + oy) * ow + ox] =
            (base[0] + base[1] + base[w] + base[w + 1]) * T(0.25);
      }
  if (Tape<T>* tape = detail::joint_tape(x)) {
    out.tape = tape;
    int nx = x.node;
    out.node =
        tape->add_node(out.shape, {nx}, [nx, c, h, w, oh, ow](const std::vector<T>& d, Tape<T>& t) {
          auto& g = t.grad_buffer(nx);
          for (int ci = 0; ci < c; ++ci)
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                T v = d[(static_cast<std::int64_t>(ci) * oh + oy) * ow + ox] * T(0.25);
                T* base = g.data() + (static_cast<std::int64_t>(ci) * h + 2 * oy) * w + 2 * ox;
                base[0] += v;
                base[1] += v;
                base[w] += v;
                base[w + 1] += v;
              }
        });
  }
  return out;
}

// (C*gs, H, W) -> (C, H, W), averaging each consecutive block of gs channels.
template <typename T>
Tensor<T> mean_channel_groups(const Tensor<T>& x, int gs) {
  require(x.shape.size() == 3 && x.shape[0] % gs == 0, ErrorCode::ShapeMismatch,
          "mean_channel_groups: channels " + std::to_string(x.shape[0]) + " not divisible");
  int c = x.shape[0] / gs, h = x.shape[1], w = x.shape[2];
  std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor<T> out = Tensor<T>::zeros({c, h, w});
  const T inv = T(1) / T(gs);
  for (int ci = 0; ci < c; ++ci)
    for (int r = 0; r < gs; ++r) {
      const T* src = x.ptr() + (static_cast<std::int64_t>(ci) * gs + r) * plane;
      T* dst = out.ptr() + static_cast<std::int64_t>(ci) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i] * inv;
    }
  if (Tape<T>* tape = detail::joint_tape(x)) {
    out.tape = tape;
    int nx = x.node;
    out.node = tape->add_node(
        out.shape, {nx}, [nx, c, gs, plane](const std::vector<T>& d, Tape<T>& t) {
          auto& g = t.grad_buffer(nx);
          const T inv2 = T(1) / T(gs);
          for (int ci = 0; ci < c; ++ci)
            for (int r = 0; r < gs; ++r) {
              T* dst = g.data() + (static_cast<std::int64_t>(ci) * gs + r) * plane;
              const T* src = d.data() + static_cast<std::int64_t>(ci) * plane;
              for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i] * inv2;
            }
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += a.ptr()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (Tape<T>* tape = detail::joint_tape(a)) {
    out.tape = tape;
    int na = a.node;
    auto n = a.size();
    out.node = tape->add_node(out.shape, {na}, [na, n](const std::vector<T>& d, Tape<T>& t) {
      auto& g = t.grad_buffer(na);
      for (std::int64_t i = 0; i < n; ++i) g[i] += d[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / T(a.size()));
}

// Sum of squared differences (squared Frobenius distance).
template <typename T>
Tensor<T> frobenius_l2(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "frobenius_l2");
  T acc = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    T dlt = a.ptr()[i] - b.ptr()[i];
    acc += dlt * dlt;
  }
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (Tape<T>* tape = detail::joint_tape(a, b)) {
    out.tape = tape;
    int na = a.node, nb = b.node;
    auto da = a.data, db = b.data;
    out.node =
        tape->add_node(out.shape, {na, nb}, [na, nb, da, db](const std::vector<T>& d, Tape<T>& t) {
          for (size_t i = 0; i < da->size(); ++i) {
            T v = T(2) * ((*da)[i] - (*db)[i]) * d[0];
            if (na >= 0) t.grad_buffer(na)[i] += v;
            if (nb >= 0) t.grad_buffer(nb)[i] -= v;
          }
        });
  }
  return out;
}

template <typename T>
std::vector<T> softmax_values(const T* logits, int n) {
  T mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  std::vector<T> p(n);
  T z = 0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= z;
  return p;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require(logits.shape.size() == 1, ErrorCode::ShapeMismatch, "softmax: need 1-D input");
  int n = logits.shape[0];
  Tensor<T> out = Tensor<T>::from(logits.shape, softmax_values(logits.ptr(), n));
  if (Tape<T>* tape = detail::joint_tape(logits)) {
    out.tape = tape;
    int na = logits.node;
    auto pdata = out.data;
    out.node =
        tape->add_node(out.shape, {na}, [na, pdata, n](const std::vector<T>& d, Tape<T>& t) {
          auto& g = t.grad_buffer(na);
          T dot = 0;
          for (int i = 0; i < n; ++i) dot += d[i] * (*pdata)[i];
          for (int i = 0; i < n; ++i) g[i] += (*pdata)[i] * (d[i] - dot);
        });
  }
  return out;
}

// Cross entropy of softmax(logits) against a delta at target.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, int target) {
  require(logits.shape.size() == 1, ErrorCode::ShapeMismatch, "softmax_cross_entropy: 1-D input");
  int n = logits.shape[0];
  require(target >= 0 && target < n, ErrorCode::InvalidArgument,
          "softmax_cross_entropy: target out of range");
  T mx = logits.ptr()[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits.ptr()[i]);
  T z = 0;
  for (int i = 0; i < n; ++i) z += std::exp(logits.ptr()[i] - mx);
  Tensor<T> out = Tensor<T>::scalar(std::log(z) + mx - logits.ptr()[target]);
  if (Tape<T>* tape = detail::joint_tape(logits)) {
    out.tape = tape;
    int na = logits.node;
    auto da = logits.data;
    out.node =
        tape->add_node(out.shape, {na}, [na, da, target, n](const std::vector<T>& d, Tape<T>& t) {
          auto& g = t.grad_buffer(na);
          std::vector<T> p = softmax_values(da->data(), n);
          for (int i = 0; i < n; ++i) g[i] += d[0] * (p[i] - (i == target ? T(1) : T(0)));
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tol = 0.0;
  std::string worst;  // parameter/index of the worst deviation
  bool pass() const { return max_rel_err < tol; }
};

// Central-difference check of d(fn)/d(params). fn must rebuild its graph from
// the leaves it is handed on each call. 64-bit only; denominators are floored
// to avoid 0/0 on dead parameters.
GradCheckReport grad_check(
    const std::function<Tensor<double>(Tape<double>&, std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> params, double eps = 1e-5, double tol = 1e-4);

}  // namespace i2i
