#include <doctest.h>

#include <cmath>

#include "core/encoder.hpp"

using namespace i2i;

namespace {

template <typename T>
Tensor<T> randn(Rng& rng, Shape s) {
  Tensor<T> t = Tensor<T>::zeros(std::move(s));
  for (std::int64_t i = 0; i < t.size(); ++i) t.ptr()[i] = static_cast<T>(rng.normal());
  return t;
}

template <typename T>
double max_abs_diff_t(const Tensor<T>& a, const Tensor<T>& b) {
  REQUIRE(a.shape == b.shape);
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.ptr()[i]) - b.ptr()[i]));
  return worst;
}

}  // namespace

TEST_CASE("c4 lift: rotating the input rotates and shifts the orientations") {
  Rng rng(1);
  const int cout = 3, cin = 1, ks = 3;
  Tensor<double> w = randn<double>(rng, {cout, cin, ks, ks});
  Tensor<double> x = randn<double>(rng, {cin, 8, 8});
  auto tab = c4_lift_table(cout, cin, ks);
  Tensor<double> kfull = index_select(w, tab, {cout * 4, cin, ks, ks});
  Tensor<double> y = conv2d(x, kfull, Tensor<double>{});
  Tensor<double> yr = conv2d(rotate90(x, 1), kfull, Tensor<double>{});

  // y'(co, ro) == rot90(y(co, ro-1)).
  double worst = 0.0;
  for (int co = 0; co < cout; ++co)
    for (int ro = 0; ro < 4; ++ro) {
      int prev = (ro + 3) % 4;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
          // rot90 ccw source of (r, c) is (c, 7-r).
          double expect = y.ptr()[((co * 4 + prev) * 8 + c) * 8 + (7 - r)];
          double got = yr.ptr()[((co * 4 + ro) * 8 + r) * 8 + c];
          worst = std::max(worst, std::abs(expect - got));
        }
    }
  CHECK(worst < 1e-12);

  Tensor<double> zw = Tensor<double>::zeros({cout, cin, ks, ks});
  Tensor<double> zk = index_select(zw, tab, {cout * 4, cin, ks, ks});
  Tensor<double> zy = conv2d(x, zk, Tensor<double>{});
  for (std::int64_t i = 0; i < zy.size(); ++i) CHECK(zy.ptr()[i] == 0.0);
}

TEST_CASE("c4 group conv preserves the equivariance law") {
  Rng rng(2);
  const int cout = 2, cin = 3, ks = 3;
  Tensor<double> w = randn<double>(rng, {cout, cin, 4, ks, ks});
  Tensor<double> x = randn<double>(rng, {cin * 4, 8, 8});
  auto tab = c4_group_table(cout, cin, ks);
  Tensor<double> kfull = index_select(w, tab, {cout * 4, cin * 4, ks, ks});
  Tensor<double> y = conv2d(x, kfull, Tensor<double>{});

  // Transform the input like a group feature map: rotate spatially and shift
  // each channel's orientation index.
  Tensor<double> xr = Tensor<double>::zeros(x.shape);
  Tensor<double> xrot = rotate90(x, 1);
  for (int ci = 0; ci < cin; ++ci)
    for (int ri = 0; ri < 4; ++ri)
      for (int p = 0; p < 64; ++p)
        xr.ptr()[(ci * 4 + ri) * 64 + p] = xrot.ptr()[(ci * 4 + (ri + 3) % 4) * 64 + p];
  Tensor<double> yr = conv2d(xr, kfull, Tensor<double>{});

  double worst = 0.0;
  for (int co = 0; co < cout; ++co)
    for (int ro = 0; ro < 4; ++ro) {
      int prev = (ro + 3) % 4;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
          double expect = y.ptr()[((co * 4 + prev) * 8 + c) * 8 + (7 - r)];
          double got = yr.ptr()[((co * 4 + ro) * 8 + r) * 8 + c];
          worst = std::max(worst, std::abs(expect - got));
        }
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("encode emits the contracted 8x8xk feature map") {
  EncoderConfig cfg;
  cfg.out_channels = 14;
  Rng rng(3);
  Encoder<double> enc = Encoder<double>::init(cfg, rng);
  Tensor<double> img = randn<double>(rng, {1, 32, 32});
  Tensor<double> y = enc.forward(img);
  CHECK(y.shape == Shape{14, 8, 8});
}

TEST_CASE("encode is exactly C4 equivariant; the plain encoder is not") {
  Rng rng(4);
  EncoderConfig cfg;
  cfg.out_channels = 10;
  Encoder<double> enc = Encoder<double>::init(cfg, rng);
  Tensor<double> img = randn<double>(rng, {1, 32, 32});
  Tensor<double> base = enc.forward(img);
  Tensor<double> rot = enc.forward(rotate90(img, 1));
  CHECK(max_abs_diff_t(rot, rotate90(base, 1)) < 1e-10);

  // Quarter-turn equivariance composes to the 180-degree case too.
  Tensor<double> rot2 = enc.forward(rotate90(img, 2));
  CHECK(max_abs_diff_t(rot2, rotate90(base, 2)) < 1e-10);

  EncoderConfig plain = cfg;
  plain.equivariant = false;
  Encoder<double> penc = Encoder<double>::init(plain, rng);
  Tensor<double> pbase = penc.forward(img);
  Tensor<double> prot = penc.forward(rotate90(img, 1));
  CHECK(max_abs_diff_t(prot, rotate90(pbase, 1)) > 1e-3);
}

TEST_CASE("f32 encode keeps equivariance to float precision") {
  Rng rng(5);
  EncoderConfig cfg;
  cfg.out_channels = 8;
  Encoder<float> enc = Encoder<float>::init(cfg, rng);
  Tensor<float> img = randn<float>(rng, {1, 32, 32});
  Tensor<float> base = enc.forward(img);
  Tensor<float> rot = enc.forward(rotate90(img, 1));
  CHECK(max_abs_diff_t(rot, rotate90(base, 1)) < 1e-6);
}

TEST_CASE("equivariant and plain capacities stay within 15 percent") {
  EncoderConfig cfg;  // defaults: base 8, k 112
  Rng rng(6);
  auto equ = Encoder<double>::init(cfg, rng);
  EncoderConfig pcfg = cfg;
  pcfg.equivariant = false;
  auto plain = Encoder<double>::init(pcfg, rng);
  double ratio = static_cast<double>(plain.param_count()) / equ.param_count();
  INFO("equivariant ", equ.param_count(), " plain ", plain.param_count());
  CHECK(ratio > 0.85);
  CHECK(ratio < 1.15);
}

TEST_CASE("encoder gradients pass grad_check on a tiny config") {
  EncoderConfig cfg;
  cfg.input_size = 8;
  cfg.base_channels = 2;
  cfg.out_channels = 4;
  Rng rng(7);
  Encoder<double> enc = Encoder<double>::init(cfg, rng);
  Tensor<double> img = randn<double>(rng, {1, 8, 8});

  std::vector<Tensor<double>> params;
  enc.visit([&](const std::string&, Tensor<double>& t) { params.push_back(t); });
  auto fn = [&](Tape<double>& t, std::vector<Tensor<double>>& p) {
    Encoder<double> live = enc;
    size_t at = 0;
    live.visit([&](const std::string&, Tensor<double>& w) { w = p[at++]; });
    Tensor<double> y = live.forward(img);
    Rng local(8);
    Tensor<double> coeff = Tensor<double>::zeros(y.shape);
    for (std::int64_t i = 0; i < coeff.size(); ++i) coeff.ptr()[i] = local.normal();
    return sum(mul(y, coeff));
  };
  auto rep = grad_check(fn, params, 1e-5, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass());
}
