#include "core/shapes.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace i2i {

namespace {

constexpr double kPi = 3.14159265358979323846;

double primitive_area(const Primitive& p) {
  const Vec3& h = p.half_extents;
  switch (p.kind) {
    case PrimitiveKind::Box:
      return 8.0 * (h.x * h.y + h.y * h.z + h.x * h.z);
    case PrimitiveKind::Ellipsoid: {
      // Thomsen approximation, plenty for sample budgeting.
      const double pw = 1.6075;
      double ap = std::pow(h.x, pw), bp = std::pow(h.y, pw), cp = std::pow(h.z, pw);
      return 4.0 * kPi * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / pw);
    }
    case PrimitiveKind::Cylinder:
      return 2.0 * kPi * h.x * (2.0 * h.z) + 2.0 * kPi * h.x * h.x;
  }
  return 0.0;
}

Vec3 sample_point_on(const Primitive& p, Rng& rng) {
  const Vec3& h = p.half_extents;
  Vec3 local;
  switch (p.kind) {
    case PrimitiveKind::Box: {
      double ax = h.y * h.z, ay = h.x * h.z, az = h.x * h.y;
      double pick = rng.uniform() * (ax + ay + az);
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
      if (pick < ax)
        local = {sign * h.x, u * h.y, v * h.z};
      else if (pick < ax + ay)
        local = {u * h.x, sign * h.y, v * h.z};
      else
        local = {u * h.x, v * h.y, sign * h.z};
      break;
    }
    case PrimitiveKind::Ellipsoid: {
      Vec3 d{rng.normal(), rng.normal(), rng.normal()};
      double n = norm(d);
      if (n < 1e-12) {
        local = {h.x, 0, 0};
      } else {
        local = {h.x * d.x / n, h.y * d.y / n, h.z * d.z / n};
      }
      break;
    }
    case PrimitiveKind::Cylinder: {
      double side = 2.0 * kPi * h.x * 2.0 * h.z;
      double cap = kPi * h.x * h.x;
      double pick = rng.uniform() * (side + 2 * cap);
      if (pick < side) {
        double a = rng.uniform() * 2.0 * kPi;
        local = {h.x * std::cos(a), h.x * std::sin(a), rng.uniform(-1, 1) * h.z};
      } else {
        double a = rng.uniform() * 2.0 * kPi;
        double r = h.x * std::sqrt(rng.uniform());
        local = {r * std::cos(a), r * std::sin(a), pick < side + cap ? h.z : -h.z};
      }
      break;
    }
  }
  return p.center + p.orientation * local;
}

void normalize_to_unit_ball(ShapeSpec& spec) {
  Rng rng(spec.seed ^ 0xB10BULL);
  double maxr = 1e-9;
  for (const auto& p : spec.primitives) {
    Primitive probe = p;
    for (int i = 0; i < 4000; ++i) maxr = std::max(maxr, norm(sample_point_on(probe, rng)));
  }
  double f = 0.98 / maxr;
  for (auto& p : spec.primitives) {
    p.center = f * p.center;
    p.half_extents = f * p.half_extents;
  }
}

double jf(Rng& rng, double frac = 0.15) { return 1.0 + frac * rng.uniform(-1, 1); }

Primitive box(Vec3 c, Vec3 h) { return {PrimitiveKind::Box, c, h, Rotation()}; }
Primitive ellipsoid(Vec3 c, Vec3 h) { return {PrimitiveKind::Ellipsoid, c, h, Rotation()}; }
Primitive cylinder(Vec3 c, double r, double hz) {
  return {PrimitiveKind::Cylinder, c, {r, r, hz}, Rotation()};
}

ShapeSpec make_instance(const std::string& cls, std::uint64_t seed) {
  ShapeSpec spec;
  spec.seed = seed;
  Rng rng(seed);
  auto off = [&](double s) { return s * rng.uniform(-1, 1); };

  if (cls == "lshape") {
    spec.primitives = {
        box({off(0.04), off(0.04), off(0.04)},
            {0.55 * jf(rng), 0.16 * jf(rng), 0.12 * jf(rng)}),
        box({0.38 + off(0.04), 0.34 + off(0.04), off(0.04)},
            {0.16 * jf(rng), 0.44 * jf(rng), 0.12 * jf(rng)}),
        box({-0.34 + off(0.04), off(0.04), 0.21 + off(0.04)},
            {0.14 * jf(rng), 0.14 * jf(rng), 0.15 * jf(rng)}),
    };
  } else if (cls == "tee") {
    spec.primitives = {
        cylinder({off(0.03), off(0.03), -0.12 + off(0.03)}, 0.16 * jf(rng), 0.46 * jf(rng)),
        box({0.13 + off(0.04), off(0.03), 0.42 + off(0.03)},
            {0.42 * jf(rng), 0.14 * jf(rng), 0.10 * jf(rng)}),
        ellipsoid({-0.31 + off(0.03), 0.19 + off(0.03), 0.42 + off(0.03)},
                  {0.13 * jf(rng), 0.13 * jf(rng), 0.13 * jf(rng)}),
    };
  } else if (cls == "blob") {
    spec.primitives = {
        ellipsoid({off(0.03), off(0.03), off(0.03)},
                  {0.46 * jf(rng), 0.30 * jf(rng), 0.20 * jf(rng)}),
        ellipsoid({0.31 + off(0.03), 0.26 + off(0.03), 0.12 + off(0.03)},
                  {0.19 * jf(rng), 0.19 * jf(rng), 0.30 * jf(rng)}),
        box({-0.27 + off(0.03), -0.22 + off(0.03), -0.14 + off(0.03)},
            {0.30 * jf(rng), 0.10 * jf(rng), 0.09 * jf(rng)}),
    };
  } else if (cls == "box") {
    // Deliberately symmetric; used as the asymmetry-guard negative control.
    spec.primitives = {box({0, 0, 0}, {0.5 * jf(rng), 0.33 * jf(rng), 0.21 * jf(rng)})};
  } else {
    throw_error(ErrorCode::InvalidArgument, "unknown shape class '" + cls + "'");
  }
  normalize_to_unit_ball(spec);
  return spec;
}

}  // namespace

SurfaceCloud sample_surface(const ShapeSpec& spec, int budget) {
  require(!spec.primitives.empty(), ErrorCode::InvalidArgument, "sample_surface: empty spec");
  SurfaceCloud cloud;
  cloud.points.reserve(budget);
  Rng rng(spec.seed ^ 0x5A11ULL);
  double total_area = 0.0;
  for (const auto& p : spec.primitives) total_area += primitive_area(p);
  for (const auto& p : spec.primitives) {
    int n = std::max(1, static_cast<int>(budget * primitive_area(p) / total_area));
    for (int i = 0; i < n; ++i) cloud.points.push_back(sample_point_on(p, rng));
  }
  return cloud;
}

Image render(const SurfaceCloud& cloud, const Rotation& view, int height, int width,
             RenderMode mode, double coverage) {
  Image depth;
  depth.height = height;
  depth.width = width;
  depth.channels = 1;
  depth.pixels.assign(static_cast<size_t>(height) * width, 0.0f);

  const double s = coverage * std::min(height, width) / 2.0;
  const double cu = (width - 1) / 2.0;
  const double cv = (height - 1) / 2.0;
  const Mat3& m = view.matrix();
  for (const Vec3& p : cloud.points) {
    Vec3 q = m * p;
    int ix = static_cast<int>(std::lround(cu + s * q.x));
    int iy = static_cast<int>(std::lround(cv - s * q.y));
    if (ix < 0 || ix >= width || iy < 0 || iy >= height) continue;
    float d = static_cast<float>(std::clamp(0.5 + 0.5 * q.z, 1e-3, 1.0));
    float& cell = depth.pixels[static_cast<size_t>(iy) * width + ix];
    cell = std::max(cell, d);
  }
  if (mode == RenderMode::Depth) return depth;

  // Headlight Lambertian shading from finite-difference normals. The light
  // sits on the camera axis, which keeps shading exactly symmetric under
  // in-plane rotations of the scene.
  Image gray = depth;
  auto d_at = [&](int y, int x, float fallback) {
    float v = depth.at(y, x);
    return v > 0.0f ? v : fallback;
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      float center = depth.at(y, x);
      if (center <= 0.0f) {
        gray.at(y, x) = 0.0f;
        continue;
      }
      double gu = (d_at(y, std::min(x + 1, width - 1), center) -
                   d_at(y, std::max(x - 1, 0), center)) * 0.5;
      double gv = (d_at(std::min(y + 1, height - 1), x, center) -
                   d_at(std::max(y - 1, 0), x, center)) * 0.5;
      // Surface slope in world units: z = 2*depth - 1, pixel pitch 1/s.
      double fx = 2.0 * gu * s;
      double fy = -2.0 * gv * s;
      double nz = 1.0 / std::sqrt(1.0 + fx * fx + fy * fy);
      gray.at(y, x) = static_cast<float>(nz);
    }
  return gray;
}

Image render(const ShapeSpec& spec, const Rotation& view, int height, int width, RenderMode mode,
             double coverage, int budget_at_32) {
  int budget = static_cast<int>(
      static_cast<std::int64_t>(budget_at_32) * height * width / (32 * 32));
  return render(sample_surface(spec, budget), view, height, width, mode, coverage);
}

std::vector<std::string> builtin_class_names() { return {"lshape", "tee", "blob"}; }

bool passes_asymmetry_guard(const ShapeSpec& spec, const IcoGroup& group, double threshold) {
  SurfaceCloud cloud = sample_surface(spec, 50000);
  Image base = render(cloud, Rotation(), 32, 32, RenderMode::Depth);
  for (int g = 1; g < kGroupOrder; ++g) {
    Image moved = render(cloud, group.elements[g], 32, 32, RenderMode::Depth);
    double diff = 0.0;
    for (size_t i = 0; i < base.pixels.size(); ++i)
      diff += std::abs(base.pixels[i] - moved.pixels[i]);
    diff /= base.pixels.size();
    if (diff <= threshold) return false;
  }
  return true;
}

std::vector<ShapeSpec> gen_shapes(const std::string& class_name, std::uint32_t class_id, int count,
                                  std::uint64_t seed, const IcoGroup& group,
                                  double guard_threshold) {
  require(count >= 1, ErrorCode::InvalidArgument, "gen_shapes: count must be >= 1");
  std::vector<ShapeSpec> specs;
  for (int i = 0; i < count; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      ShapeSpec spec = make_instance(
          class_name, seed + 1000003ULL * static_cast<std::uint64_t>(i) + 7919ULL * attempt);
      spec.class_id = class_id;
      spec.instance_id = static_cast<std::uint32_t>(i);
      if (passes_asymmetry_guard(spec, group, guard_threshold)) {
        specs.push_back(std::move(spec));
        ok = true;
      }
    }
    require(ok, ErrorCode::AsymmetryGuardFailed,
            "gen_shapes: instance " + std::to_string(i) + " of class '" + class_name +
                "' failed the asymmetry guard 20 times");
  }
  return specs;
}

}  // namespace i2i
