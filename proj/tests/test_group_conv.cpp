#include <doctest.h>

#include <cmath>

#include "core/group_conv.hpp"

using namespace i2i;

namespace {

const IcoGroup& group() {
  static IcoGroup g = build_group();
  return g;
}

const ProjectionPlan& plan() {
  static ProjectionPlan p = build_plan(group().quotient, 8, 8, 0.2, 0.9,
                                       ProjectionScheme::Submesh42);
  return p;
}

SphereSignal random_sphere(Rng& rng, int n) {
  SphereSignal f;
  f.n = n;
  f.values.resize(static_cast<size_t>(kSubmeshSize) * n);
  for (auto& v : f.values) v = rng.normal();
  return f;
}

DynamicFilter random_filter(Rng& rng, int m, int n) {
  DynamicFilter psi;
  psi.vertices = plan().visible;
  psi.m = m;
  psi.n = n;
  for (size_t v = 0; v < psi.vertices.size(); ++v) {
    std::vector<double> mat(static_cast<size_t>(m) * n);
    for (auto& x : mat) x = rng.normal();
    psi.values.push_back(std::move(mat));
  }
  return psi;
}

std::vector<std::vector<double>> embed_full(const DynamicFilter& psi) {
  std::vector<std::vector<double>> full(kSubmeshSize,
                                        std::vector<double>(psi.m * psi.n, 0.0));
  for (size_t v = 0; v < psi.vertices.size(); ++v) full[psi.vertices[v]] = psi.values[v];
  return full;
}

}  // namespace

TEST_CASE("zero filter and constant sphere behave as expected") {
  Rng rng(1);
  SphereSignal f = random_sphere(rng, 4);
  DynamicFilter psi = random_filter(rng, 3, 4);
  for (auto& mat : psi.values) std::fill(mat.begin(), mat.end(), 0.0);
  GroupSignal out = ico_conv(f, psi, group());
  for (double v : out.values) CHECK(v == 0.0);

  // Constant sphere: the group action cannot be seen through it.
  SphereSignal fc = f;
  for (int x = 0; x < kSubmeshSize; ++x)
    for (int j = 0; j < 4; ++j) fc.values[x * 4 + j] = 0.25 * (j + 1);
  DynamicFilter psi2 = random_filter(rng, 3, 4);
  GroupSignal oc = ico_conv(fc, psi2, group());
  for (int g = 1; g < kGroupOrder; ++g)
    for (int i = 0; i < 3; ++i)
      CHECK(oc.values[g * 3 + i] == doctest::Approx(oc.values[i]).epsilon(1e-12));
}

TEST_CASE("ico_conv equals the brute-force group convolution") {
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    int m = 1 + static_cast<int>(rng.uniform_index(4));
    int n = 1 + static_cast<int>(rng.uniform_index(5));
    SphereSignal f = random_sphere(rng, n);
    DynamicFilter psi = random_filter(rng, m, n);
    GroupSignal fast = ico_conv(f, psi, group());
    GroupSignal slow = brute_force_conv(f, embed_full(psi), m, n, group());
    for (size_t i = 0; i < fast.values.size(); ++i)
      worst = std::max(worst, std::abs(fast.values[i] - slow.values[i]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("single-vertex filter reduces to one term") {
  Rng rng(3);
  const int m = 2, n = 3;
  SphereSignal f = random_sphere(rng, n);
  DynamicFilter psi = random_filter(rng, m, n);
  int keep = 4;
  for (size_t v = 0; v < psi.values.size(); ++v)
    if (static_cast<int>(v) != keep) std::fill(psi.values[v].begin(), psi.values[v].end(), 0.0);
  int v0 = psi.vertices[keep];
  GroupSignal out = ico_conv(f, psi, group());
  for (int g = 0; g < kGroupOrder; ++g)
    for (int i = 0; i < m; ++i) {
      double expect = 0.0;
      for (int j = 0; j < n; ++j)
        expect += psi.values[keep][i * n + j] * f.values[group().act(g, v0) * n + j];
      CHECK(out.values[g * m + i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("shifting the sphere signal left-translates the output") {
  // f'(v) = f(act(g, v)) implies (f' * psi)(h) = (f * psi)(g h).
  Rng rng(4);
  const int m = 3, n = 4;
  SphereSignal f = random_sphere(rng, n);
  DynamicFilter psi = random_filter(rng, m, n);
  GroupSignal base = ico_conv(f, psi, group());
  double worst = 0.0;
  for (int g = 0; g < kGroupOrder; ++g) {
    SphereSignal shifted;
    shifted.n = n;
    shifted.values.resize(f.values.size());
    for (int p = 0; p < kSubmeshSize; ++p)
      for (int j = 0; j < n; ++j)
        shifted.values[p * n + j] = f.values[group().act(g, p) * n + j];
    GroupSignal moved = ico_conv(shifted, psi, group());
    for (int h = 0; h < kGroupOrder; ++h)
      for (int i = 0; i < m; ++i)
        worst = std::max(worst, std::abs(moved.values[h * m + i] -
                                         base.values[group().cayley[g][h] * m + i]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("ico_conv is bilinear") {
  Rng rng(5);
  const int m = 2, n = 3;
  SphereSignal f1 = random_sphere(rng, n), f2 = random_sphere(rng, n);
  DynamicFilter p1 = random_filter(rng, m, n), p2 = random_filter(rng, m, n);
  double a = 0.8, b = -1.7;

  SphereSignal fmix = f1;
  for (size_t i = 0; i < fmix.values.size(); ++i)
    fmix.values[i] = a * f1.values[i] + b * f2.values[i];
  GroupSignal left = ico_conv(fmix, p1, group());
  GroupSignal r1 = ico_conv(f1, p1, group()), r2 = ico_conv(f2, p1, group());
  for (size_t i = 0; i < left.values.size(); ++i)
    CHECK(left.values[i] == doctest::Approx(a * r1.values[i] + b * r2.values[i]).epsilon(1e-9));

  DynamicFilter pmix = p1;
  for (size_t v = 0; v < pmix.values.size(); ++v)
    for (size_t i = 0; i < pmix.values[v].size(); ++i)
      pmix.values[v][i] = a * p1.values[v][i] + b * p2.values[v][i];
  GroupSignal left2 = ico_conv(f1, pmix, group());
  GroupSignal s1 = ico_conv(f1, p1, group()), s2 = ico_conv(f1, p2, group());
  for (size_t i = 0; i < left2.values.size(); ++i)
    CHECK(left2.values[i] == doctest::Approx(a * s1.values[i] + b * s2.values[i]).epsilon(1e-9));
}

TEST_CASE("vector scheme matches an explicit reshape reference") {
  Rng rng(6);
  const int m = 3, n = 4;
  SphereSignal f = random_sphere(rng, m * n);
  DynamicFilter psi = random_filter(rng, 1, n);
  GroupSignal out = ico_conv_vector(f, psi, m, group());
  for (int g = 0; g < kGroupOrder; ++g)
    for (int i = 0; i < m; ++i) {
      double expect = 0.0;
      for (size_t v = 0; v < psi.vertices.size(); ++v) {
        int src = group().act(g, psi.vertices[v]);
        for (int j = 0; j < n; ++j)
          expect += f.values[src * m * n + i * n + j] * psi.values[v][j];
      }
      CHECK(out.values[g * m + i] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("group_pool constants, permutation invariance, max >= avg") {
  Rng rng(7);
  GroupSignal sig;
  sig.m = 5;
  sig.values.resize(static_cast<size_t>(kGroupOrder) * sig.m);
  for (auto& v : sig.values) v = rng.normal();

  GroupSignal constant = sig;
  for (int g = 0; g < kGroupOrder; ++g)
    for (int i = 0; i < 5; ++i) constant.values[g * 5 + i] = 2.5 - i;
  auto cmax = group_pool(constant, PoolMode::Max);
  auto cavg = group_pool(constant, PoolMode::Avg);
  for (int i = 0; i < 5; ++i) {
    CHECK(cmax[i] == doctest::Approx(2.5 - i).epsilon(1e-12));
    CHECK(cavg[i] == doctest::Approx(2.5 - i).epsilon(1e-12));
  }

  auto base_max = group_pool(sig, PoolMode::Max);
  auto base_avg = group_pool(sig, PoolMode::Avg);
  for (int i = 0; i < 5; ++i) CHECK(base_max[i] >= base_avg[i]);

  for (int g = 0; g < kGroupOrder; ++g) {
    GroupSignal perm;
    perm.m = 5;
    perm.values.resize(sig.values.size());
    for (int h = 0; h < kGroupOrder; ++h)
      for (int i = 0; i < 5; ++i)
        perm.values[h * 5 + i] = sig.values[group().cayley[g][h] * 5 + i];
    auto pmax = group_pool(perm, PoolMode::Max);
    auto pavg = group_pool(perm, PoolMode::Avg);
    for (int i = 0; i < 5; ++i) {
      CHECK(pmax[i] == doctest::Approx(base_max[i]).epsilon(1e-12));
      CHECK(pavg[i] == doctest::Approx(base_avg[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("tape ico_conv agrees with the plain path and passes grad_check") {
  Rng rng(8);
  const int m = 2, n = 3;
  const int nv = plan().num_visible();

  SphereSignal f = random_sphere(rng, n);
  DynamicFilter psi = random_filter(rng, m, n);
  Tensor<double> tf = Tensor<double>::from({kSubmeshSize, n}, f.values);
  Tensor<double> tp = Tensor<double>::zeros({nv, m, n});
  for (int v = 0; v < nv; ++v)
    for (int i = 0; i < m * n; ++i) tp.ptr()[v * m * n + i] = psi.values[v][i];

  GroupSignal ref = ico_conv(f, psi, group());
  Tensor<double> got = ico_conv_op(tp, tf, group(), plan().visible);
  for (size_t i = 0; i < ref.values.size(); ++i)
    CHECK(got.ptr()[i] == doctest::Approx(ref.values[i]).epsilon(1e-12));

  auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
    Tensor<double> out = ico_conv_op(p[0], p[1], group(), plan().visible);
    Rng local(9);
    Tensor<double> coeff = Tensor<double>::zeros(out.shape);
    for (std::int64_t i = 0; i < coeff.size(); ++i) coeff.ptr()[i] = local.normal();
    return sum(mul(out, coeff));
  };
  auto rep = grad_check(fn, {tp, tf}, 1e-5, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass());
}

TEST_CASE("tape vector ico_conv passes grad_check") {
  Rng rng(10);
  const int m = 2, n = 3;
  const int nv = plan().num_visible();
  Tensor<double> tf = Tensor<double>::zeros({kSubmeshSize, m * n});
  Tensor<double> tp = Tensor<double>::zeros({nv, n});
  for (std::int64_t i = 0; i < tf.size(); ++i) tf.ptr()[i] = rng.normal();
  for (std::int64_t i = 0; i < tp.size(); ++i) tp.ptr()[i] = rng.normal();

  auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
    Tensor<double> out = ico_conv_vector_op(p[0], p[1], m, group(), plan().visible);
    Rng local(11);
    Tensor<double> coeff = Tensor<double>::zeros(out.shape);
    for (std::int64_t i = 0; i < coeff.size(); ++i) coeff.ptr()[i] = local.normal();
    return sum(mul(out, coeff));
  };
  auto rep = grad_check(fn, {tp, tf}, 1e-5, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass());
}

TEST_CASE("group_pool gradients distribute and route correctly") {
  Rng rng(12);
  Tensor<double> sig = Tensor<double>::zeros({kGroupOrder, 3});
  for (std::int64_t i = 0; i < sig.size(); ++i) sig.ptr()[i] = rng.normal();

  Tape<double> tape;
  Tensor<double> l = tape.leaf(sig);
  Tensor<double> pooled = group_pool_op(l, PoolMode::Avg);
  tape.backward(sum(pooled));
  for (double g : tape.grad(l)) CHECK(g == doctest::Approx(1.0 / 60.0).epsilon(1e-12));

  // Max pooling with a forced tie: gradient goes to the lowest index.
  Tensor<double> tied = Tensor<double>::zeros({kGroupOrder, 1});
  tied.ptr()[5] = 7.0;
  tied.ptr()[9] = 7.0;
  Tape<double> t2;
  Tensor<double> l2 = t2.leaf(tied);
  t2.backward(sum(group_pool_op(l2, PoolMode::Max)));
  const auto& g2 = t2.grad(l2);
  CHECK(g2[5] == 1.0);
  CHECK(g2[9] == 0.0);

  auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
    Rng local(13);
    Tensor<double> coeff = Tensor<double>::zeros({3});
    for (int i = 0; i < 3; ++i) coeff.ptr()[i] = local.normal();
    return sum(mul(group_pool_op(p[0], PoolMode::Max), coeff));
  };
  auto rep = grad_check(fn, {sig}, 1e-5, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass());
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(14);
  SphereSignal f = random_sphere(rng, 3);
  DynamicFilter psi = random_filter(rng, 2, 4);  // n=4 vs sphere n=3
  CHECK_THROWS_AS(ico_conv(f, psi, group()), Error);
}
