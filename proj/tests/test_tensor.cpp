#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace i2i;

namespace {

Tensor<double> randn(Rng& rng, Shape s, double scale = 1.0) {
  Tensor<double> t = Tensor<double>::zeros(std::move(s));
  for (std::int64_t i = 0; i < t.size(); ++i) t.ptr()[i] = scale * rng.normal();
  return t;
}

// Contract the output against fixed coefficients so every element matters.
Tensor<double> pin(const Tensor<double>& x, Rng& rng) {
  Tensor<double> coeff = randn(rng, x.shape);
  return sum(mul(x, coeff));
}

}  // namespace

TEST_CASE("backward of sum of squares is 2x") {
  Rng rng(1);
  Tensor<double> x = randn(rng, {7});
  Tape<double> tape;
  Tensor<double> lx = tape.leaf(x);
  Tensor<double> loss = sum(mul(lx, lx));
  tape.backward(loss);
  const auto& g = tape.grad(lx);
  for (int i = 0; i < 7; ++i) CHECK(g[i] == doctest::Approx(2.0 * x.ptr()[i]).epsilon(1e-12));
}

TEST_CASE("softmax_cross_entropy gradient is softmax minus onehot") {
  Rng rng(2);
  Tensor<double> logits = randn(rng, {9});
  Tape<double> tape;
  Tensor<double> l = tape.leaf(logits);
  Tensor<double> loss = softmax_cross_entropy(l, 3);
  tape.backward(loss);
  auto p = softmax_values(logits.ptr(), 9);
  const auto& g = tape.grad(l);
  for (int i = 0; i < 9; ++i)
    CHECK(g[i] == doctest::Approx(p[i] - (i == 3 ? 1.0 : 0.0)).epsilon(1e-12));
  // Uniform logits cost ln(n).
  Tape<double> t2;
  Tensor<double> u = t2.leaf(Tensor<double>::zeros({60}));
  CHECK(softmax_cross_entropy(u, 11).item() == doctest::Approx(std::log(60.0)).epsilon(1e-12));
}

TEST_CASE("matmul forward matches a hand example") {
  Tensor<double> a = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> b = Tensor<double>::from({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor<double> c = matmul(a, b);
  CHECK(c.ptr()[0] == 58);
  CHECK(c.ptr()[1] == 64);
  CHECK(c.ptr()[2] == 139);
  CHECK(c.ptr()[3] == 154);
}

TEST_CASE("conv2d same padding centers the kernel") {
  // Delta kernel at the center reproduces the input.
  Tensor<double> x = Tensor<double>::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> k = Tensor<double>::zeros({1, 1, 3, 3});
  k.ptr()[4] = 1.0;
  Tensor<double> y = conv2d(x, k, Tensor<double>{});
  for (int i = 0; i < 9; ++i) CHECK(y.ptr()[i] == x.ptr()[i]);

  // Shifted delta moves the image; zero padding enters at the border.
  Tensor<double> k2 = Tensor<double>::zeros({1, 1, 3, 3});
  k2.ptr()[5] = 1.0;  // kernel (ky=1, kx=2) -> reads x[iy, ix+1]
  Tensor<double> y2 = conv2d(x, k2, Tensor<double>{});
  CHECK(y2.ptr()[0] == 2);
  CHECK(y2.ptr()[2] == 0);
}

TEST_CASE("conv2d stride-2 output dims") {
  Tensor<double> x = Tensor<double>::zeros({2, 8, 8});
  Tensor<double> k = Tensor<double>::zeros({3, 2, 3, 3});
  Tensor<double> y = conv2d(x, k, Tensor<double>{}, 2);
  CHECK(y.shape == Shape{3, 4, 4});
}

TEST_CASE("rotate90 rotates the trailing axes") {
  Tensor<double> x = Tensor<double>::from({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> r1 = rotate90(x, 1);
  CHECK(r1.shape == Shape{1, 3, 2});
  // 90 ccw: first output row is the last input column.
  CHECK(r1.ptr()[0] == 3);
  CHECK(r1.ptr()[1] == 6);
  CHECK(r1.ptr()[2] == 2);
  CHECK(r1.ptr()[5] == 4);
  Tensor<double> r4 = rotate90(rotate90(rotate90(rotate90(x, 1), 1), 1), 1);
  for (int i = 0; i < 6; ++i) CHECK(r4.ptr()[i] == x.ptr()[i]);
  Tensor<double> r2 = rotate90(x, 2);
  CHECK(r2.ptr()[0] == 6);
  CHECK(r2.ptr()[5] == 1);
}

TEST_CASE("grad_check validates every primitive") {
  Rng rng(42);

  SUBCASE("add sub mul div") {
    auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(7);
      Tensor<double> m = mul(p[0], p[1]);
      Tensor<double> s = sub(add(m, p[2]), p[0]);
      Tensor<double> q = div(s, add_scalar(mul(p[1], p[1]), 1.0));
      return pin(q, local);
    };
    auto rep = grad_check(fn, {randn(rng, {5}), randn(rng, {5}), randn(rng, {5})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("scale add_scalar sqrt") {
    auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(8);
      Tensor<double> s = sqrt_op(add_scalar(mul(p[0], p[0]), 0.5));
      return pin(scale(s, 1.7), local);
    };
    auto rep = grad_check(fn, {randn(rng, {6})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("relu away from kinks") {
    Tensor<double> x = randn(rng, {12});
    for (std::int64_t i = 0; i < x.size(); ++i)
      if (std::abs(x.ptr()[i]) < 0.05) x.ptr()[i] = 0.1;  // exclude zero crossings
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(9);
      return pin(relu(p[0]), local);
    };
    auto rep = grad_check(fn, {x});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("matmul") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(10);
      return pin(matmul(p[0], p[1]), local);
    };
    auto rep = grad_check(fn, {randn(rng, {3, 4}), randn(rng, {4, 5})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("linear layer at tol 1e-6") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(11);
      return pin(linear(p[0], p[1], p[2]), local);
    };
    auto rep = grad_check(fn, {randn(rng, {4}), randn(rng, {3, 4}), randn(rng, {3})}, 1e-5, 1e-6);
    INFO(rep.worst);
    CHECK(rep.pass());
  }

  SUBCASE("conv2d stride 1 same") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(12);
      return pin(conv2d(p[0], p[1], p[2]), local);
    };
    auto rep = grad_check(fn, {randn(rng, {2, 5, 5}), randn(rng, {3, 2, 3, 3}), randn(rng, {3})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("conv2d stride 2") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(13);
      return pin(conv2d(p[0], p[1], p[2], 2), local);
    };
    auto rep = grad_check(fn, {randn(rng, {2, 6, 6}), randn(rng, {2, 2, 3, 3}), randn(rng, {2})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("avgpool2x2 and mean_channel_groups") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(14);
      return pin(mean_channel_groups(avgpool2x2(p[0]), 2), local);
    };
    auto rep = grad_check(fn, {randn(rng, {4, 6, 6})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("reshape rotate90 index ops") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Rng local(15);
      Tensor<double> r = rotate90(p[0], 3);
      Tensor<double> flat = reshape(r, {16});
      Tensor<double> g = gather_rows(reshape(flat, {4, 4}), {2, 0, 2, 3});
      return pin(g, local);
    };
    auto rep = grad_check(fn, {randn(rng, {1, 4, 4})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("softmax and losses") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      Tensor<double> ce = softmax_cross_entropy(p[0], 2);
      Tensor<double> fro = frobenius_l2(p[1], p[2]);
      Tensor<double> sm = softmax(p[0]);
      Rng local(16);
      return add(add(ce, scale(fro, 0.3)), pin(sm, local));
    };
    auto rep = grad_check(fn, {randn(rng, {7}), randn(rng, {3, 3}), randn(rng, {3, 3})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }

  SUBCASE("sum and mean") {
    auto fn = [](Tape<double>& t, std::vector<Tensor<double>>& p) {
      return add(sum(mul(p[0], p[0])), mean(p[0]));
    };
    auto rep = grad_check(fn, {randn(rng, {9})});
    INFO(rep.worst);
    CHECK(rep.max_rel_err < 1e-6);
  }
}

TEST_CASE("shape mismatches carry the offending shapes") {
  Tensor<double> a = Tensor<double>::zeros({2, 3});
  Tensor<double> b = Tensor<double>::zeros({3, 3});
  try {
    add(a, b);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
    CHECK(std::string(e.what()).find("(3,3)") != std::string::npos);
  }
}

TEST_CASE("tape replay is bit deterministic") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor<double> x = randn(rng, {3, 8, 8});
    Tensor<double> k = randn(rng, {4, 3, 3, 3});
    Tensor<double> b = randn(rng, {4});
    Tape<double> tape;
    Tensor<double> lx = tape.leaf(x), lk = tape.leaf(k), lb = tape.leaf(b);
    Tensor<double> y = relu(conv2d(lx, lk, lb, 2));
    Tensor<double> loss = sum(mul(y, y));
    tape.backward(loss);
    std::vector<double> out = tape.grad(lk);
    out.push_back(loss.item());
    return out;
  };
  auto g1 = run(99), g2 = run(99);
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("gradients flow in float mode too") {
  // Not a precision test; just the f32 instantiation being exercised.
  Tensor<float> x = Tensor<float>::from({4}, {1.f, -2.f, 3.f, -4.f});
  Tape<float> tape;
  Tensor<float> lx = tape.leaf(x);
  Tensor<float> loss = sum(mul(lx, lx));
  tape.backward(loss);
  const auto& g = tape.grad(lx);
  CHECK(g[0] == doctest::Approx(2.f));
  CHECK(g[3] == doctest::Approx(-8.f));
}
