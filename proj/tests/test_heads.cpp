#include <doctest.h>

#include <cmath>

#include "core/heads.hpp"

using namespace i2i;

namespace {

const IcoGroup& group() {
  static IcoGroup g = build_group();
  return g;
}

// Straight-line scalar transcription of the loss for use as an oracle,
// sharing nothing with the tape path but the rotation primitives.
double oracle_pose_loss(const std::vector<double>& sig60x7, const Rotation& truth,
                        double lambda) {
  NearestElement near = nearest_element(group(), truth);
  double mx = -1e300;
  for (int g = 0; g < 60; ++g) mx = std::max(mx, sig60x7[g * 7]);
  double z = 0.0;
  for (int g = 0; g < 60; ++g) z += std::exp(sig60x7[g * 7] - mx);
  double cls = std::log(z) + mx - sig60x7[near.index * 7];
  const double* o = &sig60x7[near.index * 7 + 1];
  Rotation dec = gram_schmidt_6d({o[0], o[1], o[2]}, {o[3], o[4], o[5]});
  double reg = 0.0;
  for (int i = 0; i < 9; ++i) {
    double d = dec.matrix().m[i] - near.offset.matrix().m[i];
    reg += d * d;
  }
  return cls + lambda * reg;
}

// Signal whose logits peak at the truth's nearest element and whose offset
// row there encodes the exact 6D offset.
std::vector<double> ideal_signal(const Rotation& truth, double peak = 40.0) {
  NearestElement near = nearest_element(group(), truth);
  std::vector<double> sig(60 * 7, 0.0);
  sig[near.index * 7] = peak;
  const Mat3& m = near.offset.matrix();
  for (int r = 0; r < 3; ++r) {
    sig[near.index * 7 + 1 + r] = m(r, 0);
    sig[near.index * 7 + 4 + r] = m(r, 1);
  }
  return sig;
}

GroupSignal to_signal(const std::vector<double>& v, int m) {
  GroupSignal s;
  s.m = m;
  s.values = v;
  return s;
}

}  // namespace

TEST_CASE("pose_loss vanishes on an ideal head output") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Rotation truth = random_rotation(rng);
    PoseOutput out = PoseOutput::from_signal(to_signal(ideal_signal(truth), 7));
    LossBreakdown lb = pose_loss(out, truth, group());
    CHECK(lb.cls < 1e-6);
    CHECK(lb.reg < 1e-12);
    CHECK(lb.total < 1e-4);
    CHECK(lb.total == doctest::Approx(lb.cls + lb.lambda * lb.reg).epsilon(1e-12));
  }
}

TEST_CASE("uniform logits cost ln 60") {
  Rng rng(2);
  Rotation truth = random_rotation(rng);
  std::vector<double> sig = ideal_signal(truth);
  for (int g = 0; g < 60; ++g) sig[g * 7] = 1.234;
  LossBreakdown lb = pose_loss(PoseOutput::from_signal(to_signal(sig, 7)), truth, group());
  CHECK(lb.cls == doctest::Approx(std::log(60.0)).epsilon(1e-12));
}

TEST_CASE("pose_loss matches the straight-line oracle and the tape path") {
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    Rotation truth = random_rotation(rng);
    std::vector<double> sig(60 * 7);
    for (auto& v : sig) v = rng.normal();
    double expect = oracle_pose_loss(sig, truth, 100.0);

    LossBreakdown lb = pose_loss(PoseOutput::from_signal(to_signal(sig, 7)), truth, group());
    CHECK(lb.total == doctest::Approx(expect).epsilon(1e-9));

    Tensor<double> t = Tensor<double>::from({60, 7}, sig);
    auto tensors = pose_loss_op(t, truth, group(), 100.0);
    CHECK(tensors.total.item() == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("regression gradient exists only at the true element's offsets") {
  Rng rng(4);
  Rotation truth = random_rotation(rng);
  NearestElement near = nearest_element(group(), truth);
  std::vector<double> sig(60 * 7);
  for (auto& v : sig) v = rng.normal();

  Tape<double> tape;
  Tensor<double> leaf = tape.leaf(Tensor<double>::from({60, 7}, sig));
  auto lt = pose_loss_op(leaf, truth, group(), 100.0);
  tape.backward(lt.total);
  const auto& g = tape.grad(leaf);
  for (int e = 0; e < 60; ++e)
    for (int j = 1; j < 7; ++j) {
      if (e == near.index) continue;
      CHECK(g[e * 7 + j] == 0.0);
    }
  // Changing a non-target offset row leaves the loss unchanged.
  std::vector<double> sig2 = sig;
  int other = (near.index + 1) % 60;
  for (int j = 1; j < 7; ++j) sig2[other * 7 + j] += 3.21;
  CHECK(pose_loss(PoseOutput::from_signal(to_signal(sig2, 7)), truth, group()).total ==
        doctest::Approx(pose_loss(PoseOutput::from_signal(to_signal(sig, 7)), truth, group()).total)
            .epsilon(1e-12));
}

TEST_CASE("pose loss passes grad_check") {
  Rng rng(5);
  Rotation truth = random_rotation(rng);
  Tensor<double> sig = Tensor<double>::zeros({60, 7});
  for (std::int64_t i = 0; i < sig.size(); ++i) sig.ptr()[i] = rng.normal();
  auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
    return pose_loss_op(p[0], truth, group(), 100.0).total;
  };
  auto rep = grad_check(fn, {sig}, 1e-5, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass());
}

TEST_CASE("gram_schmidt_op matches the exact map and rejects degenerate rows") {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = rng.normal();
    Tensor<double> res = gram_schmidt_op(Tensor<double>::from({6}, v));
    Rotation ref = gram_schmidt_6d({v[0], v[1], v[2]}, {v[3], v[4], v[5]});
    for (int j = 0; j < 9; ++j)
      CHECK(res.ptr()[j] == doctest::Approx(ref.matrix().m[j]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gram_schmidt_op(Tensor<double>::from({6}, {0, 0, 0, 0, 1, 0})), Error);
}

TEST_CASE("predict_rotation recovers quantized and exact poses") {
  Rng rng(7);
  // Offsets encoding the identity leave exactly the quantization error.
  for (int i = 0; i < 100; ++i) {
    Rotation truth = random_rotation(rng);
    NearestElement near = nearest_element(group(), truth);
    std::vector<double> sig(60 * 7, 0.0);
    sig[near.index * 7] = 25.0;
    sig[near.index * 7 + 1] = 1.0;  // first column e1
    sig[near.index * 7 + 5] = 1.0;  // second column e2
    Rotation pred = predict_rotation(PoseOutput::from_signal(to_signal(sig, 7)), group());
    CHECK(max_abs_diff(pred.matrix(), group().elements[near.index].matrix()) < 1e-12);
    CHECK(geodesic_angle(pred, truth) ==
          doctest::Approx(geodesic_angle(group().elements[near.index], truth)).epsilon(1e-9));
  }

  // Ideal encodings round-trip to the exact truth.
  for (int i = 0; i < 10000; ++i) {
    Rotation truth = random_rotation(rng);
    Rotation pred = predict_rotation(PoseOutput::from_signal(to_signal(ideal_signal(truth), 7)),
                                     group());
    CHECK(geodesic_angle(pred, truth) < 1e-9);
  }
}

TEST_CASE("baseline heads reproduce crafted outputs") {
  Rng rng(8);
  const int d = 16;
  Tensor<double> feat = Tensor<double>::zeros({d});
  for (int i = 0; i < d; ++i) feat.ptr()[i] = rng.normal();

  BaselineHead<double> gs = BaselineHead<double>::init(d, false, rng);
  // Zero weights and a bias of (e1, e2) emit the identity rotation.
  for (std::int64_t i = 0; i < gs.w.size(); ++i) gs.w.ptr()[i] = 0.0;
  gs.b.ptr()[0] = 1.0;
  gs.b.ptr()[4] = 1.0;
  CHECK(max_abs_diff(gs.predict(feat).matrix(), Mat3::identity()) < 1e-12);

  BaselineHead<double> proc = BaselineHead<double>::init(d, true, rng);
  Rotation target = random_rotation(rng);
  for (std::int64_t i = 0; i < proc.w.size(); ++i) proc.w.ptr()[i] = 0.0;
  for (int i = 0; i < 9; ++i) proc.b.ptr()[i] = target.matrix().m[i];
  CHECK(max_abs_diff(proc.predict(feat).matrix(), target.matrix()) < 1e-10);
}

TEST_CASE("baseline head losses pass grad_check") {
  Rng rng(9);
  const int d = 10;
  Rotation truth = random_rotation(rng);
  Tensor<double> feat = Tensor<double>::zeros({d});
  for (int i = 0; i < d; ++i) feat.ptr()[i] = rng.normal();

  for (bool procrustes : {false, true}) {
    BaselineHead<double> head = BaselineHead<double>::init(d, procrustes, rng);
    auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
      BaselineHead<double> live = head;
      live.w = p[0];
      live.b = p[1];
      return live.loss_op(p[2], truth);
    };
    auto rep = grad_check(fn, {head.w, head.b, feat}, 1e-5, 1e-4);
    INFO("procrustes=", procrustes, " ", rep.worst);
    CHECK(rep.pass());
  }
}

TEST_CASE("classify is a permutation-invariant distribution") {
  Rng rng(10);
  const int classes = 5;
  GroupSignal sig;
  sig.m = classes;
  sig.values.resize(60 * classes);
  for (auto& v : sig.values) v = rng.normal();

  auto probs = classify(sig);
  double total = 0.0;
  for (double p : probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  for (int g = 0; g < 60; g += 7) {
    GroupSignal perm;
    perm.m = classes;
    perm.values.resize(sig.values.size());
    for (int h = 0; h < 60; ++h)
      for (int c = 0; c < classes; ++c)
        perm.values[h * classes + c] = sig.values[group().cayley[g][h] * classes + c];
    auto probs2 = classify(perm);
    for (int c = 0; c < classes; ++c)
      CHECK(probs2[c] == doctest::Approx(probs[c]).epsilon(1e-12));
  }

  // A constant signal dominated by one channel selects that class.
  GroupSignal constant;
  constant.m = classes;
  constant.values.assign(60 * classes, 0.0);
  for (int h = 0; h < 60; ++h) constant.values[h * classes + 3] = 9.0;
  auto cp = classify(constant);
  for (int c = 0; c < classes; ++c)
    if (c != 3) CHECK(cp[3] > cp[c]);
}
