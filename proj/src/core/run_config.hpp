#pragma once

#include <string>

#include "core/model.hpp"
#include "core/shapes.hpp"

namespace i2i {

// Everything a run needs, settable from key=value pairs (config file) or CLI
// flags. validate() reports the first offending field by name.
struct RunConfig {
  Task task = Task::Pose;
  Variant variant = Variant::I2I;
  std::string data;          // dataset path (train file; eval names the file itself)
  std::string out = "run";   // output directory
  int epochs = 0;            // 0 -> 40 for pose, 20 for cls
  int batch = 64;
  double lr = 1e-3;
  double lr_floor = 1e-5;
  double momentum = 0.9;
  double lambda = 100.0;
  double sigma = 0.2;
  double coverage = 0.9;     // icosahedron diameter on the feature map
  std::uint64_t seed = 0;
  int views = 0;             // 0 -> all views in the file; else subsample per instance
  int shift_px = 3;          // train-time shift augmentation
  double shift_depth = 0.0;
  int threads = 2;
  std::string precision = "f32";  // f32 | f64
  int base_channels = 8;
  int sphere_channels = 16;  // n

  // gen-data settings
  std::string classes = "lshape";  // comma-separated builtin class names
  int instances = 125;
  int gen_views = 60;
  int image_size = 32;
  std::string mode = "depth";  // depth | gray
  std::string sym = "none";    // none | cyclic:N | continuous
  double render_coverage = 1.0;
  double guard_threshold = 0.01;

  int effective_epochs() const { return epochs > 0 ? epochs : (task == Task::Pose ? 40 : 20); }
  SymmetrySpec symmetry() const;
  RenderMode render_mode() const;

  void set(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  void validate() const;
  std::string echo() const;  // key=value dump of every field
};

}  // namespace i2i
