#include "core/heads.hpp"

#include <cmath>

namespace i2i {

PoseOutput PoseOutput::from_signal(const GroupSignal& sig) {
  require(sig.m == 7, ErrorCode::ShapeMismatch,
          "PoseOutput: pose head needs m = 7, got " + std::to_string(sig.m));
  PoseOutput out;
  out.logits.resize(kGroupOrder);
  out.offsets6d.resize(kGroupOrder);
  for (int g = 0; g < kGroupOrder; ++g) {
    out.logits[g] = sig.values[g * 7];
    for (int j = 0; j < 6; ++j) out.offsets6d[g][j] = sig.values[g * 7 + 1 + j];
  }
  return out;
}

LossBreakdown pose_loss(const PoseOutput& out, const Rotation& truth, const IcoGroup& group,
                        double lambda) {
  NearestElement near = nearest_element(group, truth);

  double mx = out.logits[0];
  for (double v : out.logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : out.logits) z += std::exp(v - mx);
  double cls = std::log(z) + mx - out.logits[near.index];

  const auto& o = out.offsets6d[near.index];
  Rotation decoded = gram_schmidt_6d({o[0], o[1], o[2]}, {o[3], o[4], o[5]});
  double reg = 0.0;
  for (int i = 0; i < 9; ++i) {
    double d = decoded.matrix().m[i] - near.offset.matrix().m[i];
    reg += d * d;
  }

  LossBreakdown lb;
  lb.cls = cls;
  lb.reg = reg;
  lb.lambda = lambda;
  lb.total = cls + lambda * reg;
  return lb;
}

Rotation predict_rotation(const PoseOutput& out, const IcoGroup& group) {
  int best = 0;
  for (int g = 1; g < kGroupOrder; ++g)
    if (out.logits[g] > out.logits[best]) best = g;
  const auto& o = out.offsets6d[best];
  Rotation offset = gram_schmidt_6d({o[0], o[1], o[2]}, {o[3], o[4], o[5]});
  return group.elements[best] * offset;
}

std::vector<double> classify(const GroupSignal& sig) {
  std::vector<double> pooled = group_pool(sig, PoolMode::Avg);
  return softmax_values(pooled.data(), static_cast<int>(pooled.size()));
}

}  // namespace i2i
