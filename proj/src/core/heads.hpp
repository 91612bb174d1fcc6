#pragma once

#include "core/group_conv.hpp"
#include "core/ico_group.hpp"
#include "core/rotation.hpp"
#include "core/tensor.hpp"

namespace i2i {

// Pose head view of a 60 x 7 group signal: channel 0 carries element logits,
// channels 1..6 the 6D rotational offsets.
struct PoseOutput {
  std::vector<double> logits;              // 60
  std::vector<std::array<double, 6>> offsets6d;  // 60 x 6

  static PoseOutput from_signal(const GroupSignal& sig);
};

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double lambda = 0.0;
};

// Classification-then-regression loss: cross entropy of the logits against
// the element nearest the truth, plus lambda times the squared Frobenius
// distance between the true offset and the 6D-decoded offset at that element.
LossBreakdown pose_loss(const PoseOutput& out, const Rotation& truth, const IcoGroup& group,
                        double lambda = 100.0);

// argmax element composed with its decoded offset, r = M(g) * offset.
Rotation predict_rotation(const PoseOutput& out, const IcoGroup& group);

// softmax(group average pool) over a signal with one channel per class.
std::vector<double> classify(const GroupSignal& sig);

// ---------------------------------------------------------------------------
// Tape paths

// Differentiable Gram-Schmidt: 6 values -> row-major 3x3 rotation.
// Throws Error(DegenerateInput) under the same thresholds as gram_schmidt_6d.
template <typename T>
Tensor<T> gram_schmidt_op(const Tensor<T>& v6) {
  require(v6.shape == Shape{6}, ErrorCode::ShapeMismatch,
          "gram_schmidt_op: need 6 values, got " + shape_str(v6.shape));
  auto rep3 = [](const Tensor<T>& s) {
    return index_select(s, std::vector<std::int64_t>{0, 0, 0}, {3});
  };
  Tensor<T> a = index_select(v6, std::vector<std::int64_t>{0, 1, 2}, {3});
  Tensor<T> b = index_select(v6, std::vector<std::int64_t>{3, 4, 5}, {3});
  Tensor<T> na = sqrt_op(sum(mul(a, a)));
  require(na.item() > T(kGramSchmidtEps), ErrorCode::DegenerateInput,
          "gram_schmidt_op: first vector has near-zero norm");
  Tensor<T> c1 = div(a, rep3(na));
  Tensor<T> d = sum(mul(c1, b));
  Tensor<T> u = sub(b, mul(rep3(d), c1));
  Tensor<T> nu = sqrt_op(sum(mul(u, u)));
  require(nu.item() > T(kGramSchmidtEps), ErrorCode::DegenerateInput,
          "gram_schmidt_op: second vector is near-collinear with the first");
  Tensor<T> c2 = div(u, rep3(nu));
  auto perm = [](const Tensor<T>& x, std::vector<std::int64_t> p) {
    return index_select(x, std::move(p), {3});
  };
  Tensor<T> c3 = sub(mul(perm(c1, {1, 2, 0}), perm(c2, {2, 0, 1})),
                     mul(perm(c1, {2, 0, 1}), perm(c2, {1, 2, 0})));
  Tensor<T> colmajor = concat0<T>({c1, c2, c3});
  return index_select(colmajor, std::vector<std::int64_t>{0, 3, 6, 1, 4, 7, 2, 5, 8}, {3, 3});
}

template <typename T>
struct PoseLossTensors {
  Tensor<T> total, cls, reg;
  int target = 0;  // nearest element index of the truth
};

// sig: (60, 7) group signal on the tape. Regression is supervised only at the
// ground-truth-nearest element; the other offset rows receive no gradient.
template <typename T>
PoseLossTensors<T> pose_loss_op(const Tensor<T>& sig, const Rotation& truth,
                                const IcoGroup& group, T lambda) {
  require(sig.shape == Shape{kGroupOrder, 7}, ErrorCode::ShapeMismatch,
          "pose_loss: need a (60, 7) signal, got " + shape_str(sig.shape));
  NearestElement near = nearest_element(group, truth);

  std::vector<std::int64_t> logit_idx(kGroupOrder);
  for (int g = 0; g < kGroupOrder; ++g) logit_idx[g] = static_cast<std::int64_t>(g) * 7;
  Tensor<T> logits = index_select(sig, logit_idx, {kGroupOrder});

  std::vector<std::int64_t> row_idx(6);
  for (int j = 0; j < 6; ++j) row_idx[j] = static_cast<std::int64_t>(near.index) * 7 + 1 + j;
  Tensor<T> offsets = index_select(sig, row_idx, {6});

  Tensor<T> target = Tensor<T>::zeros({3, 3});
  for (int i = 0; i < 9; ++i) target.ptr()[i] = static_cast<T>(near.offset.matrix().m[i]);

  PoseLossTensors<T> out;
  out.target = near.index;
  out.cls = softmax_cross_entropy(logits, near.index);
  out.reg = frobenius_l2(gram_schmidt_op(offsets), target);
  out.total = add(out.cls, scale(out.reg, lambda));
  return out;
}

// Classification loss: cross entropy on the group-averaged signal.
template <typename T>
Tensor<T> classify_loss_op(const Tensor<T>& sig, int target) {
  return softmax_cross_entropy(group_pool_op(sig, PoolMode::Avg), target);
}

// Direct-regression baseline heads: a linear map from a pooled feature vector
// to 6D (Gram-Schmidt) or 9D (Procrustes) rotation parameters.
template <typename T>
struct BaselineHead {
  bool procrustes = false;
  Tensor<T> w, b;

  static BaselineHead init(int feat_dim, bool procrustes, Rng& rng) {
    BaselineHead h;
    h.procrustes = procrustes;
    int out = procrustes ? 9 : 6;
    double bound = std::sqrt(3.0 / feat_dim);
    h.w = Tensor<T>::zeros({out, feat_dim});
    for (std::int64_t i = 0; i < h.w.size(); ++i)
      h.w.ptr()[i] = static_cast<T>(rng.uniform(-bound, bound));
    h.b = Tensor<T>::zeros({out});
    return h;
  }

  BaselineHead attach(Tape<T>& tape) const {
    BaselineHead h = *this;
    h.w = tape.leaf(w);
    h.b = tape.leaf(b);
    return h;
  }

  // Squared Frobenius loss against the ground-truth matrix. The 6D head is
  // trained through the Gram-Schmidt map; the 9D head is trained on the raw
  // matrix and orthonormalized only at prediction time.
  Tensor<T> loss_op(const Tensor<T>& feat, const Rotation& truth) const {
    Tensor<T> v = linear(feat, w, b);
    Tensor<T> target = Tensor<T>::zeros({3, 3});
    for (int i = 0; i < 9; ++i) target.ptr()[i] = static_cast<T>(truth.matrix().m[i]);
    Tensor<T> pred = procrustes ? reshape(v, {3, 3}) : gram_schmidt_op(v);
    return frobenius_l2(pred, target);
  }

  Rotation predict(const Tensor<T>& feat) const {
    Tensor<T> v = linear(feat, w, b);
    if (procrustes) {
      Mat3 m;
      for (int i = 0; i < 9; ++i) m.m[i] = static_cast<double>(v.ptr()[i]);
      return procrustes_9d(m);
    }
    return gram_schmidt_6d({v.ptr()[0], v.ptr()[1], v.ptr()[2]},
                           {v.ptr()[3], v.ptr()[4], v.ptr()[5]});
  }
};

}  // namespace i2i
