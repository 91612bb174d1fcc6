#pragma once

#include <string>
#include <vector>

#include "core/ico_group.hpp"
#include "core/projection.hpp"
#include "core/tensor.hpp"

namespace i2i {

// Feature sphere: one n-vector per submesh point, trainable in the model.
struct SphereSignal {
  std::vector<double> values;  // 42 x n row-major
  int n = 0;
  bool trainable = false;
};

// A function over the 60 group elements in canonical element order.
struct GroupSignal {
  std::vector<double> values;  // 60 x m row-major
  int m = 0;
};

// Dynamic-filter icosahedral convolution:
//   out[g] = sum over visible v of psi[v] (m x n) * f[act(g, v)] (n).
GroupSignal ico_conv(const SphereSignal& f, const DynamicFilter& psi, const IcoGroup& group);

// Vector variant: psi rows are n-vectors (m == 1 in the filter) and the
// feature sphere is matrix-valued, 42 x (m*n):
//   out[g] = sum over v of reshape(f[act(g, v)], m x n) * psi[v].
GroupSignal ico_conv_vector(const SphereSignal& f, const DynamicFilter& psi, int m,
                            const IcoGroup& group);

// Direct transcription of the group-convolution sum over the whole submesh,
//   out[g] = sum over all 42 x of psi_full[T_g^{-1} x] * f[x],
// with psi_full zero off the visible support. Independent oracle for ico_conv.
GroupSignal brute_force_conv(const SphereSignal& f, const std::vector<std::vector<double>>& psi_full,
                             int m, int n, const IcoGroup& group);

enum class PoolMode { Max, Avg };

// Per-channel reduction across the 60 elements.
std::vector<double> group_pool(const GroupSignal& sig, PoolMode mode);

// ---------------------------------------------------------------------------
// Tape primitives. The group must outlive the tape.

// psi: (V, m, n) over plan-visible vertices, f: (42, n) -> (60, m).
template <typename T>
Tensor<T> ico_conv_op(const Tensor<T>& psi, const Tensor<T>& f, const IcoGroup& group,
                      const std::vector<int>& visible) {
  require(psi.shape.size() == 3 && static_cast<size_t>(psi.shape[0]) == visible.size(),
          ErrorCode::ShapeMismatch, "ico_conv: filter shape " + shape_str(psi.shape));
  require(f.shape.size() == 2 && f.shape[0] == kSubmeshSize && f.shape[1] == psi.shape[2],
          ErrorCode::ShapeMismatch,
          "ico_conv: sphere " + shape_str(f.shape) + " vs filter " + shape_str(psi.shape));
  const int nv = psi.shape[0], m = psi.shape[1], n = psi.shape[2];

  Tensor<T> out = Tensor<T>::zeros({kGroupOrder, m});
  const T* pp = psi.ptr();
  const T* pf = f.ptr();
  T* po = out.ptr();
  for (int g = 0; g < kGroupOrder; ++g) {
    T* orow = po + static_cast<std::int64_t>(g) * m;
    for (int v = 0; v < nv; ++v) {
      const T* frow = pf + static_cast<std::int64_t>(group.act(g, visible[v])) * n;
      const T* pmat = pp + static_cast<std::int64_t>(v) * m * n;
      for (int i = 0; i < m; ++i) {
        T acc = 0;
        for (int j = 0; j < n; ++j) acc += pmat[i * n + j] * frow[j];
        orow[i] += acc;
      }
    }
  }

  if (Tape<T>* tape = detail::joint_tape(psi, f)) {
    out.tape = tape;
    int np = psi.node, nf = f.node;
    auto dp = psi.data, df = f.data;
    const IcoGroup* grp = &group;
    auto vis = visible;
    out.node = tape->add_node(
        out.shape, {np, nf}, [=](const std::vector<T>& d, Tape<T>& t) {
          if (np >= 0) {
            auto& g2 = t.grad_buffer(np);
            for (int g = 0; g < kGroupOrder; ++g)
              for (int v = 0; v < nv; ++v) {
                const T* frow = df->data() + static_cast<std::int64_t>(grp->act(g, vis[v])) * n;
                T* gmat = g2.data() + static_cast<std::int64_t>(v) * m * n;
                for (int i = 0; i < m; ++i) {
                  T dv = d[g * m + i];
                  for (int j = 0; j < n; ++j) gmat[i * n + j] += dv * frow[j];
                }
              }
          }
          if (nf >= 0) {
            auto& g2 = t.grad_buffer(nf);
            for (int g = 0; g < kGroupOrder; ++g)
              for (int v = 0; v < nv; ++v) {
                T* grow = g2.data() + static_cast<std::int64_t>(grp->act(g, vis[v])) * n;
                const T* pmat = dp->data() + static_cast<std::int64_t>(v) * m * n;
                for (int i = 0; i < m; ++i) {
                  T dv = d[g * m + i];
                  for (int j = 0; j < n; ++j) grow[j] += dv * pmat[i * n + j];
                }
              }
          }
        });
  }
  return out;
}

// psi: (V, n) vectors, f: (42, m*n) -> (60, m).
template <typename T>
Tensor<T> ico_conv_vector_op(const Tensor<T>& psi, const Tensor<T>& f, int m,
                             const IcoGroup& group, const std::vector<int>& visible) {
  require(psi.shape.size() == 2 && static_cast<size_t>(psi.shape[0]) == visible.size(),
          ErrorCode::ShapeMismatch, "ico_conv_vector: filter shape " + shape_str(psi.shape));
  const int n = psi.shape[1];
  require(f.shape.size() == 2 && f.shape[0] == kSubmeshSize && f.shape[1] == m * n,
          ErrorCode::ShapeMismatch,
          "ico_conv_vector: sphere " + shape_str(f.shape) + " needs " + std::to_string(m * n) +
              " columns");
  const int nv = psi.shape[0];

  Tensor<T> out = Tensor<T>::zeros({kGroupOrder, m});
  for (int g = 0; g < kGroupOrder; ++g) {
    T* orow = out.ptr() + static_cast<std::int64_t>(g) * m;
    for (int v = 0; v < nv; ++v) {
      const T* frow = f.ptr() + static_cast<std::int64_t>(group.act(g, visible[v])) * m * n;
      const T* prow = psi.ptr() + static_cast<std::int64_t>(v) * n;
      for (int i = 0; i < m; ++i) {
        T acc = 0;
        for (int j = 0; j < n; ++j) acc += frow[i * n + j] * prow[j];
        orow[i] += acc;
      }
    }
  }

  if (Tape<T>* tape = detail::joint_tape(psi, f)) {
    out.tape = tape;
    int np = psi.node, nf = f.node;
    auto dp = psi.data, df = f.data;
    const IcoGroup* grp = &group;
    auto vis = visible;
    out.node = tape->add_node(
        out.shape, {np, nf}, [=](const std::vector<T>& d, Tape<T>& t) {
          for (int g = 0; g < kGroupOrder; ++g)
            for (int v = 0; v < nv; ++v) {
              std::int64_t frow = static_cast<std::int64_t>(grp->act(g, vis[v])) * m * n;
              for (int i = 0; i < m; ++i) {
                T dv = d[g * m + i];
                if (np >= 0) {
                  auto& gp = t.grad_buffer(np);
                  for (int j = 0; j < n; ++j)
                    gp[static_cast<std::int64_t>(v) * n + j] += dv * (*df)[frow + i * n + j];
                }
                if (nf >= 0) {
                  auto& gf = t.grad_buffer(nf);
                  for (int j = 0; j < n; ++j)
                    gf[frow + i * n + j] += dv * (*dp)[static_cast<std::int64_t>(v) * n + j];
                }
              }
            }
        });
  }
  return out;
}

// (60, m) -> (m). Average spreads gradient 1/60; max routes it to the argmax
// with ties resolved to the lowest element index.
template <typename T>
Tensor<T> group_pool_op(const Tensor<T>& sig, PoolMode mode) {
  require(sig.shape.size() == 2 && sig.shape[0] == kGroupOrder, ErrorCode::ShapeMismatch,
          "group_pool: signal shape " + shape_str(sig.shape));
  const int m = sig.shape[1];
  Tensor<T> out = Tensor<T>::zeros({m});
  std::vector<int> arg(m, 0);
  if (mode == PoolMode::Avg) {
    for (int g = 0; g < kGroupOrder; ++g)
      for (int i = 0; i < m; ++i) out.ptr()[i] += sig.ptr()[g * m + i];
    for (int i = 0; i < m; ++i) out.ptr()[i] /= T(kGroupOrder);
  } else {
    for (int i = 0; i < m; ++i) {
      T best = sig.ptr()[i];
      for (int g = 1; g < kGroupOrder; ++g) {
        T v = sig.ptr()[g * m + i];
        if (v > best) {
          best = v;
          arg[i] = g;
        }
      }
      out.ptr()[i] = best;
    }
  }
  if (Tape<T>* tape = detail::joint_tape(sig)) {
    out.tape = tape;
    int ns = sig.node;
    out.node = tape->add_node(out.shape, {ns}, [ns, m, mode, arg](const std::vector<T>& d, Tape<T>& t) {
      auto& g2 = t.grad_buffer(ns);
      if (mode == PoolMode::Avg) {
        for (int g = 0; g < kGroupOrder; ++g)
          for (int i = 0; i < m; ++i) g2[g * m + i] += d[i] / T(kGroupOrder);
      } else {
        for (int i = 0; i < m; ++i) g2[arg[i] * m + i] += d[i];
      }
    });
  }
  return out;
}

}  // namespace i2i
