#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/ico_group.hpp"
#include "core/rotation.hpp"

namespace i2i {

enum class PrimitiveKind { Box, Ellipsoid, Cylinder };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  Vec3 center;
  Vec3 half_extents;  // cylinder: (radius, radius, half-height) before orientation
  Rotation orientation;
};

// A procedural object instance. Primitives are normalized so the union fits
// inside the unit ball; instances of a class differ by seeded jitter.
struct ShapeSpec {
  std::uint32_t class_id = 0;
  std::uint32_t instance_id = 0;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
};

enum class RenderMode { Depth, Gray };

struct Image {
  int height = 0, width = 0, channels = 1;
  std::vector<float> pixels;  // H*W*C row-major, channel fastest

  float& at(int y, int x, int c = 0) { return pixels[(y * width + x) * channels + c]; }
  float at(int y, int x, int c = 0) const { return pixels[(y * width + x) * channels + c]; }
};

// Deterministic surface point samples of a spec in object coordinates.
struct SurfaceCloud {
  std::vector<Vec3> points;
};

SurfaceCloud sample_surface(const ShapeSpec& spec, int budget);

// Orthographic render from the +z camera looking along -z: the object is
// rotated by `view`, points are z-buffered per pixel, and depth is stored as
// (z+1)/2 in (0, 1] with 0 for background. `coverage` is the fraction of
// min(H, W) the unit-ball diameter spans. Gray mode shades the depth buffer
// with a Lambertian term from finite-difference normals.
Image render(const SurfaceCloud& cloud, const Rotation& view, int height, int width,
             RenderMode mode, double coverage = 1.0);
Image render(const ShapeSpec& spec, const Rotation& view, int height, int width, RenderMode mode,
             double coverage = 1.0, int budget_at_32 = 200000);

// Built-in procedural classes ("lshape", "tee", "blob").
std::vector<std::string> builtin_class_names();

// `count` jittered instances of one class. Every instance must pass the
// asymmetry guard: its canonical render differs from each nontrivially
// rotated render by a mean absolute pixel difference above the threshold
// (20 attempts per instance before Error(AsymmetryGuardFailed)).
std::vector<ShapeSpec> gen_shapes(const std::string& class_name, std::uint32_t class_id, int count,
                                  std::uint64_t seed, const IcoGroup& group,
                                  double guard_threshold = 0.01);

// Exposed for the negative-control test.
bool passes_asymmetry_guard(const ShapeSpec& spec, const IcoGroup& group, double threshold);

}  // namespace i2i
