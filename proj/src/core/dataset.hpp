#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rotation.hpp"
#include "core/shapes.hpp"

namespace i2i {

// One rendered view with its (symmetry-canonicalized) rotation label.
struct Sample {
  Image image;
  Rotation label;
  std::uint32_t class_id = 0;
  std::uint32_t instance_id = 0;
};

struct Dataset {
  int height = 0, width = 0, channels = 1;
  std::vector<Sample> samples;
};

struct DatasetOptions {
  int views = 60;
  int height = 32, width = 32;
  RenderMode mode = RenderMode::Depth;
  double coverage = 1.0;       // object span as a fraction of min(H, W)
  int budget_at_32 = 200000;   // surface samples per render at 32x32
  SymmetrySpec sym;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Haar-random views of every spec, rendered in parallel; labels are fixed
// points of canonicalize_label under opts.sym.
Dataset make_dataset(const std::vector<ShapeSpec>& specs, const DatasetOptions& opts);

// Split by instance id: ids with id % 5 == 4 go to test (80/20).
void split_dataset(const Dataset& all, Dataset* train, Dataset* test);

// Little-endian container: magic "I2ID", u32 version=1, u32 num_samples,
// u32 H, u32 W, u32 C, then per sample u32 class id, u32 instance id,
// 4 x f64 quaternion (w, x, y, z), H*W*C x f32 image row-major.
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

// Integer pixel translation with zero fill plus a constant depth shift on
// foreground pixels, clamped to [0, 1].
Sample augment(const Sample& s, int max_shift_px, double depth_shift_frac, Rng& rng);

}  // namespace i2i
