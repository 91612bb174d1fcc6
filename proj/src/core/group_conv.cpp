#include "core/group_conv.hpp"

#include "core/error.hpp"

namespace i2i {

GroupSignal ico_conv(const SphereSignal& f, const DynamicFilter& psi, const IcoGroup& group) {
  require(psi.n == f.n, ErrorCode::ShapeMismatch,
          "ico_conv: filter inner dim " + std::to_string(psi.n) + " vs sphere " +
              std::to_string(f.n));
  require(static_cast<int>(f.values.size()) == kSubmeshSize * f.n, ErrorCode::ShapeMismatch,
          "ico_conv: sphere signal must cover the 42-point submesh");
  GroupSignal out;
  out.m = psi.m;
  out.values.assign(static_cast<size_t>(kGroupOrder) * psi.m, 0.0);
  for (int g = 0; g < kGroupOrder; ++g) {
    double* orow = out.values.data() + static_cast<std::int64_t>(g) * psi.m;
    for (size_t v = 0; v < psi.vertices.size(); ++v) {
      const double* frow =
          f.values.data() + static_cast<std::int64_t>(group.act(g, psi.vertices[v])) * f.n;
      const std::vector<double>& mat = psi.values[v];
      for (int i = 0; i < psi.m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < psi.n; ++j) acc += mat[i * psi.n + j] * frow[j];
        orow[i] += acc;
      }
    }
  }
  return out;
}

GroupSignal ico_conv_vector(const SphereSignal& f, const DynamicFilter& psi, int m,
                            const IcoGroup& group) {
  require(psi.m == 1, ErrorCode::ShapeMismatch, "ico_conv_vector: filter rows must be vectors");
  require(f.n == m * psi.n, ErrorCode::ShapeMismatch,
          "ico_conv_vector: sphere columns " + std::to_string(f.n) + " vs m*n = " +
              std::to_string(m * psi.n));
  GroupSignal out;
  out.m = m;
  out.values.assign(static_cast<size_t>(kGroupOrder) * m, 0.0);
  const int n = psi.n;
  for (int g = 0; g < kGroupOrder; ++g) {
    double* orow = out.values.data() + static_cast<std::int64_t>(g) * m;
    for (size_t v = 0; v < psi.vertices.size(); ++v) {
      const double* frow =
          f.values.data() + static_cast<std::int64_t>(group.act(g, psi.vertices[v])) * f.n;
      const std::vector<double>& vec = psi.values[v];
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += frow[i * n + j] * vec[j];
        orow[i] += acc;
      }
    }
  }
  return out;
}

GroupSignal brute_force_conv(const SphereSignal& f,
                             const std::vector<std::vector<double>>& psi_full, int m, int n,
                             const IcoGroup& group) {
  require(static_cast<int>(psi_full.size()) == kSubmeshSize, ErrorCode::ShapeMismatch,
          "brute_force_conv: psi_full must cover all 42 submesh points");
  require(f.n == n, ErrorCode::ShapeMismatch, "brute_force_conv: inner dimension mismatch");
  GroupSignal out;
  out.m = m;
  out.values.assign(static_cast<size_t>(kGroupOrder) * m, 0.0);
  for (int g = 0; g < kGroupOrder; ++g) {
    int ginv = group.inverse[g];
    double* orow = out.values.data() + static_cast<std::int64_t>(g) * m;
    for (int x = 0; x < kSubmeshSize; ++x) {
      const std::vector<double>& mat = psi_full[group.act(ginv, x)];
      const double* frow = f.values.data() + static_cast<std::int64_t>(x) * n;
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += mat[i * n + j] * frow[j];
        orow[i] += acc;
      }
    }
  }
  return out;
}

std::vector<double> group_pool(const GroupSignal& sig, PoolMode mode) {
  std::vector<double> out(sig.m, 0.0);
  if (mode == PoolMode::Avg) {
    for (int g = 0; g < kGroupOrder; ++g)
      for (int i = 0; i < sig.m; ++i) out[i] += sig.values[g * sig.m + i];
    for (auto& v : out) v /= kGroupOrder;
  } else {
    for (int i = 0; i < sig.m; ++i) {
      out[i] = sig.values[i];
      for (int g = 1; g < kGroupOrder; ++g) out[i] = std::max(out[i], sig.values[g * sig.m + i]);
    }
  }
  return out;
}

}  // namespace i2i
