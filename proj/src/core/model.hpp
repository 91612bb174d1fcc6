#pragma once

#include <memory>

#include "core/encoder.hpp"
#include "core/group_conv.hpp"
#include "core/heads.hpp"
#include "core/projection.hpp"
#include "core/shapes.hpp"

namespace i2i {

enum class Task { Pose, Cls };

enum class Variant {
  I2I,          // C4 encoder, 42-point projection, icosahedral group conv
  Sparse,       // projection restricted to the 12 vertices
  Vector,       // vector-valued filter, matrix-valued feature sphere
  NoE2CNN,      // plain encoder in front of the group conv
  NoGroupConv,  // projected features flattened into a trained linear map
  CnnGS,        // plain encoder + 6D Gram-Schmidt regression head
  CnnProc,      // plain encoder + 9D Procrustes regression head
  E2CNNInv,     // C4 encoder + C4 pooling + linear classifier (cls only)
};

Task task_from_string(const std::string& s);
std::string to_string(Task t);
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  Task task = Task::Pose;
  Variant variant = Variant::I2I;
  int image_size = 32;
  int base_channels = 8;
  int num_classes = 1;
  int n = 16;                // feature sphere channels
  double sigma = 0.2;        // Gaussian width, unit-sphere units
  double coverage = 0.9;     // icosahedron diameter / min(H, W) on the feature map

  int m() const { return task == Task::Pose ? 7 : num_classes; }
  // Channels the encoder must emit for this variant.
  int encoder_channels() const {
    if (variant == Variant::CnnGS || variant == Variant::CnnProc || variant == Variant::E2CNNInv)
      return 112;
    return variant == Variant::Vector ? n : m() * n;
  }
  bool uses_group_conv() const {
    return variant == Variant::I2I || variant == Variant::Sparse || variant == Variant::Vector ||
           variant == Variant::NoE2CNN;
  }
  bool emits_group_signal() const {
    return uses_group_conv() || variant == Variant::NoGroupConv;
  }
};

template <typename T>
struct Model {
  ModelConfig cfg;
  std::shared_ptr<const IcoGroup> group;
  ProjectionPlan plan;
  Encoder<T> encoder;
  Tensor<T> sphere;             // feature sphere, group-conv variants
  Tensor<T> ngc_w, ngc_b;       // no-groupconv linear map
  Tensor<T> inv_w, inv_b;       // e2cnn-inv classifier
  BaselineHead<T> baseline;     // cnn-gs / cnn-proc

  static Model init(const ModelConfig& cfg, std::shared_ptr<const IcoGroup> group, Rng& rng);

  Model attach(Tape<T>& tape) const;
  void visit(const std::function<void(const std::string&, Tensor<T>&)>& fn);

  // (60, m) group signal; only for variants that emit one.
  Tensor<T> forward_signal(const Tensor<T>& image) const;
  // Pooled feature vector for the baseline/classifier heads.
  Tensor<T> forward_feature(const Tensor<T>& image) const;

  struct LossOut {
    Tensor<T> total;
    double cls = 0.0, reg = 0.0;
  };
  LossOut loss(const Tensor<T>& image, const Rotation& label, int class_id, double lambda) const;

  Rotation predict_pose(const Tensor<T>& image) const;
  std::vector<double> predict_class_scores(const Tensor<T>& image) const;

  std::int64_t param_count();
};

// Image tensor (1, H, W) from a stored sample image (H x W x 1 floats).
template <typename T>
Tensor<T> image_tensor(const Image& img) {
  Tensor<T> t = Tensor<T>::zeros({1, img.height, img.width});
  for (size_t i = 0; i < img.pixels.size(); ++i) t.ptr()[i] = static_cast<T>(img.pixels[i]);
  return t;
}

}  // namespace i2i
