#include "core/projection.hpp"

#include <cmath>

#include "core/error.hpp"

namespace i2i {

ProjectionPlan build_plan(const Quotient& quotient, int height, int width, double sigma,
                          double coverage, ProjectionScheme scheme) {
  require(height >= 2 && width >= 2, ErrorCode::InvalidArgument, "build_plan: H, W must be >= 2");
  require(coverage > 0.0 && coverage <= 1.0, ErrorCode::InvalidArgument,
          "build_plan: coverage must be in (0, 1]");
  require(sigma > 0.0, ErrorCode::InvalidArgument, "build_plan: sigma must be positive");

  ProjectionPlan plan;
  plan.scheme = scheme;
  plan.height = height;
  plan.width = width;
  plan.sigma = sigma;
  plan.coverage = coverage;

  const double s = coverage * std::min(height, width) / 2.0;
  const double cu = (width - 1) / 2.0;
  const double cv = (height - 1) / 2.0;
  const double sigma_px = sigma * s;
  const int limit =
      scheme == ProjectionScheme::Sparse12 ? kNumVertices : kSubmeshSize;

  for (int p = 0; p < limit; ++p) {
    const Vec3& pt = quotient.submesh[p];
    if (pt.z < -1e-9) continue;
    plan.visible.push_back(p);
    plan.pixel_coords.emplace_back(cu + s * pt.x, cv - s * pt.y);
  }
  require(!plan.visible.empty(), ErrorCode::EmptyVisibleSet,
          "build_plan: no submesh vertex faces the camera");

  for (size_t vi = 0; vi < plan.visible.size(); ++vi) {
    auto [u, v] = plan.pixel_coords[vi];
    std::vector<double> d2(static_cast<size_t>(height) * width);
    double d2min = 1e300;
    for (int iy = 0; iy < height; ++iy)
      for (int ix = 0; ix < width; ++ix) {
        double du = ix - u, dv = iy - v;
        d2[static_cast<size_t>(iy) * width + ix] = du * du + dv * dv;
        d2min = std::min(d2min, d2[static_cast<size_t>(iy) * width + ix]);
      }
    // Shift by the row minimum before exponentiating so narrow kernels do not
    // underflow to an all-zero row.
    std::vector<double> w(d2.size());
    double total = 0.0;
    for (size_t i = 0; i < d2.size(); ++i) {
      w[i] = std::exp(-(d2[i] - d2min) / (2.0 * sigma_px * sigma_px));
      total += w[i];
    }
    for (auto& x : w) x /= total;
    plan.weights.push_back(std::move(w));
  }
  return plan;
}

DynamicFilter project(const ProjectionPlan& plan, const std::vector<double>& y, int m, int n) {
  const int k = m * n;
  require(static_cast<std::int64_t>(y.size()) ==
              static_cast<std::int64_t>(plan.height) * plan.width * k,
          ErrorCode::ShapeMismatch,
          "project: feature map has " + std::to_string(y.size()) + " values, expected H*W*k = " +
              std::to_string(plan.height * plan.width * k) + " (k = m*n = " + std::to_string(k) +
              ")");
  for (double v : y)
    require(std::isfinite(v), ErrorCode::InvalidArgument, "project: non-finite feature value");

  DynamicFilter out;
  out.vertices = plan.visible;
  out.m = m;
  out.n = n;
  const int hw = plan.height * plan.width;
  for (int vi = 0; vi < plan.num_visible(); ++vi) {
    std::vector<double> val(k, 0.0);
    const std::vector<double>& w = plan.weights[vi];
    for (int p = 0; p < hw; ++p) {
      double wp = w[p];
      if (wp == 0.0) continue;
      const double* src = y.data() + static_cast<std::int64_t>(p) * k;
      for (int c = 0; c < k; ++c) val[c] += wp * src[c];
    }
    out.values.push_back(std::move(val));
  }
  return out;
}

}  // namespace i2i
