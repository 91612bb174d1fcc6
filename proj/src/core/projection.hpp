#pragma once

#include <memory>
#include <vector>

#include "core/ico_group.hpp"
#include "core/tensor.hpp"

namespace i2i {

enum class ProjectionScheme { Submesh42, Sparse12, Vector };

// A dynamic filter: one m x n matrix per camera-facing submesh vertex,
// implicitly zero elsewhere. The vector variant stores 1 x n rows.
struct DynamicFilter {
  std::vector<int> vertices;                 // visible submesh indices
  std::vector<std::vector<double>> values;   // per vertex, m*n row-major
  int m = 0, n = 0;
};

// Precomputed orthographic projection of the visible submesh onto an H x W
// feature map: per-vertex pixel coordinates and normalized Gaussian weights.
struct ProjectionPlan {
  ProjectionScheme scheme = ProjectionScheme::Submesh42;
  int height = 0, width = 0;
  double sigma = 0.0, coverage = 0.0;
  std::vector<int> visible;                     // submesh indices, ascending
  std::vector<std::pair<double, double>> pixel_coords;  // (u, v) per visible vertex
  std::vector<std::vector<double>> weights;     // visible x (H*W), rows sum to 1

  int num_visible() const { return static_cast<int>(visible.size()); }
};

// Visibility predicate is z >= -1e-9 so that exactly-equatorial points stay
// in the support; pixel mapping is u = (W-1)/2 + s*x, v = (H-1)/2 - s*y with
// s = coverage*min(H,W)/2, and Gaussian width sigma*s pixels (sigma is in
// unit-sphere units).
ProjectionPlan build_plan(const Quotient& quotient, int height, int width, double sigma,
                          double coverage, ProjectionScheme scheme);

// y is an H x W x k feature map (k fastest); k must equal m*n.
DynamicFilter project(const ProjectionPlan& plan, const std::vector<double>& y, int m, int n);

// Tape path: features (k, H, W) -> per-visible-vertex features (V, k).
// Linear in the features; the backward pass is the transposed map.
template <typename T>
Tensor<T> project_op(const ProjectionPlan& plan, const Tensor<T>& feat) {
  require(feat.shape.size() == 3 && feat.shape[1] == plan.height && feat.shape[2] == plan.width,
          ErrorCode::ShapeMismatch, "project_op: feature map " + shape_str(feat.shape) +
                                        " does not match plan " + std::to_string(plan.height) +
                                        "x" + std::to_string(plan.width));
  const int k = feat.shape[0];
  const int hw = plan.height * plan.width;
  const int nv = plan.num_visible();

  Tensor<T> wmat = Tensor<T>::zeros({hw, nv});
  for (int vi = 0; vi < nv; ++vi)
    for (int p = 0; p < hw; ++p) wmat.ptr()[static_cast<std::int64_t>(p) * nv + vi] =
        static_cast<T>(plan.weights[vi][p]);

  Tensor<T> flat = reshape(feat, {k, hw});
  Tensor<T> kv = matmul(flat, wmat);  // (k, V)
  std::vector<std::int64_t> tr(static_cast<size_t>(nv) * k);
  for (int vi = 0; vi < nv; ++vi)
    for (int c = 0; c < k; ++c) tr[static_cast<std::int64_t>(vi) * k + c] =
        static_cast<std::int64_t>(c) * nv + vi;
  return index_select(kv, tr, {nv, k});
}

}  // namespace i2i
