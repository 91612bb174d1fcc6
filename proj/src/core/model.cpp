#include "core/model.hpp"

#include <cmath>

#include "core/error.hpp"

namespace i2i {

Task task_from_string(const std::string& s) {
  if (s == "pose") return Task::Pose;
  if (s == "cls") return Task::Cls;
  throw_error(ErrorCode::InvalidArgument, "unknown task '" + s + "' (expected pose|cls)");
}

std::string to_string(Task t) { return t == Task::Pose ? "pose" : "cls"; }

Variant variant_from_string(const std::string& s) {
  if (s == "i2i") return Variant::I2I;
  if (s == "sparse") return Variant::Sparse;
  if (s == "vector") return Variant::Vector;
  if (s == "no-e2cnn") return Variant::NoE2CNN;
  if (s == "no-groupconv") return Variant::NoGroupConv;
  if (s == "cnn-gs") return Variant::CnnGS;
  if (s == "cnn-proc") return Variant::CnnProc;
  if (s == "e2cnn-inv") return Variant::E2CNNInv;
  throw_error(ErrorCode::InvalidArgument,
              "unknown variant '" + s +
                  "' (expected i2i|sparse|vector|no-e2cnn|no-groupconv|cnn-gs|cnn-proc|e2cnn-inv)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::I2I: return "i2i";
    case Variant::Sparse: return "sparse";
    case Variant::Vector: return "vector";
    case Variant::NoE2CNN: return "no-e2cnn";
    case Variant::NoGroupConv: return "no-groupconv";
    case Variant::CnnGS: return "cnn-gs";
    case Variant::CnnProc: return "cnn-proc";
    case Variant::E2CNNInv: return "e2cnn-inv";
  }
  return "?";
}

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t.ptr()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::shared_ptr<const IcoGroup> group, Rng& rng) {
  require(cfg.task == Task::Pose || cfg.num_classes >= 2, ErrorCode::InvalidArgument,
          "classification needs num_classes >= 2");
  require(cfg.task == Task::Cls || cfg.variant != Variant::E2CNNInv, ErrorCode::InvalidArgument,
          "e2cnn-inv is a classification baseline");
  require(cfg.task == Task::Pose ||
              (cfg.variant != Variant::CnnGS && cfg.variant != Variant::CnnProc),
          ErrorCode::InvalidArgument, "cnn-gs/cnn-proc are pose baselines");
  require(cfg.image_size % 4 == 0, ErrorCode::InvalidArgument,
          "image size must be divisible by 4");

  Model<T> model;
  model.cfg = cfg;
  model.group = std::move(group);

  EncoderConfig enc;
  enc.input_size = cfg.image_size;
  enc.base_channels = cfg.base_channels;
  enc.equivariant = cfg.variant != Variant::NoE2CNN && cfg.variant != Variant::CnnGS &&
                    cfg.variant != Variant::CnnProc;
  enc.out_channels = cfg.encoder_channels();
  model.encoder = Encoder<T>::init(enc, rng);

  ProjectionScheme scheme = cfg.variant == Variant::Sparse ? ProjectionScheme::Sparse12
                           : cfg.variant == Variant::Vector ? ProjectionScheme::Vector
                                                            : ProjectionScheme::Submesh42;
  int fs = enc.feature_size();
  model.plan = build_plan(model.group->quotient, fs, fs, cfg.sigma, cfg.coverage, scheme);

  const int m = cfg.m(), n = cfg.n;
  if (cfg.uses_group_conv()) {
    int cols = cfg.variant == Variant::Vector ? m * n : n;
    model.sphere = uniform_tensor<T>({kSubmeshSize, cols}, std::sqrt(3.0 / cols), rng);
  }
  if (cfg.variant == Variant::NoGroupConv) {
    int in = model.plan.num_visible() * cfg.encoder_channels();
    model.ngc_w = uniform_tensor<T>({kGroupOrder * m, in}, std::sqrt(3.0 / in), rng);
    model.ngc_b = Tensor<T>::zeros({kGroupOrder * m});
  }
  if (cfg.variant == Variant::E2CNNInv) {
    model.inv_w = uniform_tensor<T>({cfg.num_classes, 112}, std::sqrt(3.0 / 112.0), rng);
    model.inv_b = Tensor<T>::zeros({cfg.num_classes});
  }
  if (cfg.variant == Variant::CnnGS || cfg.variant == Variant::CnnProc)
    model.baseline = BaselineHead<T>::init(112, cfg.variant == Variant::CnnProc, rng);
  return model;
}

template <typename T>
Model<T> Model<T>::attach(Tape<T>& tape) const {
  Model<T> m = *this;
  m.encoder = encoder.attach(tape);
  if (m.sphere.data) m.sphere = tape.leaf(sphere);
  if (m.ngc_w.data) {
    m.ngc_w = tape.leaf(ngc_w);
    m.ngc_b = tape.leaf(ngc_b);
  }
  if (m.inv_w.data) {
    m.inv_w = tape.leaf(inv_w);
    m.inv_b = tape.leaf(inv_b);
  }
  if (m.baseline.w.data) m.baseline = baseline.attach(tape);
  return m;
}

template <typename T>
void Model<T>::visit(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
  encoder.visit(fn);
  if (sphere.data) fn("sphere", sphere);
  if (ngc_w.data) {
    fn("ngc.weight", ngc_w);
    fn("ngc.bias", ngc_b);
  }
  if (inv_w.data) {
    fn("inv.weight", inv_w);
    fn("inv.bias", inv_b);
  }
  if (baseline.w.data) {
    fn("baseline.weight", baseline.w);
    fn("baseline.bias", baseline.b);
  }
}

template <typename T>
std::int64_t Model<T>::param_count() {
  std::int64_t total = 0;
  visit([&](const std::string&, Tensor<T>& t) { total += t.size(); });
  return total;
}

template <typename T>
Tensor<T> Model<T>::forward_signal(const Tensor<T>& image) const {
  require(cfg.emits_group_signal(), ErrorCode::InvalidArgument,
          "variant " + to_string(cfg.variant) + " has no group signal");
  Tensor<T> feat = encoder.forward(image);
  Tensor<T> projected = project_op(plan, feat);  // (V, k)
  const int m = cfg.m(), n = cfg.n;
  const int nv = plan.num_visible();
  switch (cfg.variant) {
    case Variant::Vector:
      return ico_conv_vector_op(projected, sphere, m, *group, plan.visible);
    case Variant::NoGroupConv: {
      Tensor<T> flat = reshape(projected, {nv * cfg.encoder_channels()});
      return reshape(linear(flat, ngc_w, ngc_b), {kGroupOrder, m});
    }
    default:
      return ico_conv_op(reshape(projected, {nv, m, n}), sphere, *group, plan.visible);
  }
}

template <typename T>
Tensor<T> Model<T>::forward_feature(const Tensor<T>& image) const {
  Tensor<T> feat = encoder.forward(image);  // (k, h, w)
  int k = feat.shape[0], hw = feat.shape[1] * feat.shape[2];
  Tensor<T> ones = Tensor<T>::zeros({hw, 1});
  for (int i = 0; i < hw; ++i) ones.ptr()[i] = T(1) / T(hw);
  return reshape(matmul(reshape(feat, {k, hw}), ones), {k});
}

template <typename T>
typename Model<T>::LossOut Model<T>::loss(const Tensor<T>& image, const Rotation& label,
                                          int class_id, double lambda) const {
  LossOut out;
  if (cfg.task == Task::Pose) {
    if (cfg.variant == Variant::CnnGS || cfg.variant == Variant::CnnProc) {
      out.total = baseline.loss_op(forward_feature(image), label);
      out.reg = out.total.item();
      return out;
    }
    auto pl = pose_loss_op(forward_signal(image), label, *group, static_cast<T>(lambda));
    out.total = pl.total;
    out.cls = pl.cls.item();
    out.reg = pl.reg.item();
    return out;
  }
  if (cfg.variant == Variant::E2CNNInv) {
    out.total = softmax_cross_entropy(linear(forward_feature(image), inv_w, inv_b), class_id);
  } else {
    out.total = classify_loss_op(forward_signal(image), class_id);
  }
  out.cls = out.total.item();
  return out;
}

template <typename T>
Rotation Model<T>::predict_pose(const Tensor<T>& image) const {
  require(cfg.task == Task::Pose, ErrorCode::InvalidArgument, "predict_pose on a cls model");
  if (cfg.variant == Variant::CnnGS || cfg.variant == Variant::CnnProc)
    return baseline.predict(forward_feature(image));
  Tensor<T> sig = forward_signal(image);
  GroupSignal gs;
  gs.m = 7;
  gs.values.assign(sig.ptr(), sig.ptr() + sig.size());
  return predict_rotation(PoseOutput::from_signal(gs), *group);
}

template <typename T>
std::vector<double> Model<T>::predict_class_scores(const Tensor<T>& image) const {
  require(cfg.task == Task::Cls, ErrorCode::InvalidArgument, "class scores on a pose model");
  if (cfg.variant == Variant::E2CNNInv) {
    Tensor<T> logits = linear(forward_feature(image), inv_w, inv_b);
    std::vector<double> l(logits.size());
    for (std::int64_t i = 0; i < logits.size(); ++i) l[i] = logits.ptr()[i];
    auto probs = softmax_values(l.data(), static_cast<int>(l.size()));
    return probs;
  }
  Tensor<T> sig = forward_signal(image);
  GroupSignal gs;
  gs.m = cfg.num_classes;
  gs.values.assign(sig.ptr(), sig.ptr() + sig.size());
  return classify(gs);
}

template struct Model<float>;
template struct Model<double>;

}  // namespace i2i
