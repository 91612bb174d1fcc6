#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "core/dataset.hpp"
#include "core/error.hpp"

using namespace i2i;

namespace {

const IcoGroup& group() {
  static IcoGroup g = build_group();
  return g;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("gen_shapes is deterministic and guard-checked") {
  auto a = gen_shapes("lshape", 0, 3, 42, group());
  auto b = gen_shapes("lshape", 0, 3, 42, group());
  REQUIRE(a.size() == 3);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(a[i].primitives.size() == b[i].primitives.size());
    CHECK(a[i].seed == b[i].seed);
    for (size_t p = 0; p < a[i].primitives.size(); ++p) {
      CHECK(norm(a[i].primitives[p].center - b[i].primitives[p].center) == 0.0);
      CHECK(norm(a[i].primitives[p].half_extents - b[i].primitives[p].half_extents) == 0.0);
    }
  }
  for (const auto& spec : a) CHECK(passes_asymmetry_guard(spec, group(), 0.01));
}

TEST_CASE("a plain box fails the asymmetry guard") {
  CHECK_THROWS_AS(gen_shapes("box", 0, 1, 7, group()), Error);
}

TEST_CASE("all builtin classes generate valid instances") {
  std::uint32_t cid = 0;
  for (const auto& name : builtin_class_names()) {
    auto specs = gen_shapes(name, cid++, 2, 11, group());
    CHECK(specs.size() == 2);
    // Everything stays inside the unit ball.
    for (const auto& spec : specs) {
      SurfaceCloud cloud = sample_surface(spec, 20000);
      for (const auto& p : cloud.points) CHECK(norm(p) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("render basics: empty input, depth range, determinism") {
  auto specs = gen_shapes("lshape", 0, 1, 3, group());
  SurfaceCloud empty;
  Image blank = render(empty, Rotation(), 32, 32, RenderMode::Depth);
  for (float v : blank.pixels) CHECK(v == 0.0f);

  Rng rng(4);
  Rotation view = random_rotation(rng);
  Image a = render(specs[0], view, 32, 32, RenderMode::Depth);
  Image b = render(specs[0], view, 32, 32, RenderMode::Depth);
  int fg = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    CHECK(a.pixels[i] == b.pixels[i]);
    CHECK(a.pixels[i] >= 0.0f);
    CHECK(a.pixels[i] <= 1.0f);
    if (a.pixels[i] > 0.0f) ++fg;
  }
  CHECK(fg > 50);

  Image g = render(specs[0], view, 32, 32, RenderMode::Gray);
  for (size_t i = 0; i < g.pixels.size(); ++i) {
    CHECK(g.pixels[i] >= 0.0f);
    CHECK(g.pixels[i] <= 1.0f);
    CHECK((a.pixels[i] > 0) == (g.pixels[i] > 0));
  }
}

TEST_CASE("a z-axis half turn of the object rotates the render by 180 degrees") {
  auto specs = gen_shapes("tee", 0, 1, 5, group());
  Rng rng(6);
  for (RenderMode mode : {RenderMode::Depth, RenderMode::Gray}) {
    for (int trial = 0; trial < 3; ++trial) {
      Rotation view = random_rotation(rng);
      Image base = render(specs[0], view, 32, 32, mode);
      Image turned = render(specs[0], Rotation::rot_z(M_PI) * view, 32, 32, mode);
      double diff = 0.0;
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          diff += std::abs(turned.at(y, x) - base.at(31 - y, 31 - x));
      diff /= 32 * 32;
      CHECK(diff < 2.0 / 255.0);
    }
  }
}

TEST_CASE("make_dataset counts, labels, split and idempotent canonicalization") {
  auto specs = gen_shapes("lshape", 0, 5, 9, group());
  DatasetOptions opts;
  opts.views = 6;
  opts.seed = 21;
  opts.threads = 2;
  Dataset ds = make_dataset(specs, opts);
  REQUIRE(ds.samples.size() == 30);

  // sym = none keeps the raw sampling rotations: regenerate the label stream.
  Rng label_rng(opts.seed ^ 0x9E3779B97F4A7C15ULL);
  for (const auto& s : ds.samples) {
    Rotation expect = random_rotation(label_rng);
    CHECK(max_abs_diff(s.label.matrix(), expect.matrix()) == 0.0);
  }

  DatasetOptions symopts = opts;
  symopts.sym = SymmetrySpec::continuous_z();
  Dataset dsym = make_dataset(specs, symopts);
  for (const auto& s : dsym.samples) {
    Rotation twice = canonicalize_label(s.label, symopts.sym);
    CHECK(max_abs_diff(twice.matrix(), s.label.matrix()) < 1e-9);
  }

  Dataset train, test;
  split_dataset(ds, &train, &test);
  CHECK(train.samples.size() == 24);
  CHECK(test.samples.size() == 6);
  std::set<std::uint32_t> train_ids, test_ids;
  for (const auto& s : train.samples) train_ids.insert(s.instance_id);
  for (const auto& s : test.samples) test_ids.insert(s.instance_id);
  for (auto id : train_ids) CHECK(test_ids.count(id) == 0);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  auto specs = gen_shapes("blob", 2, 2, 13, group());
  DatasetOptions opts;
  opts.views = 3;
  opts.seed = 5;
  Dataset ds = make_dataset(specs, opts);

  std::string p1 = "test_roundtrip_a.i2id";
  std::string p2 = "test_roundtrip_b.i2id";
  write_dataset(p1, ds);
  Dataset back = read_dataset(p1);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.height == ds.height);
  write_dataset(p2, back);
  CHECK(read_bytes(p1) == read_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("augment identities and inverses") {
  auto specs = gen_shapes("lshape", 0, 1, 17, group());
  DatasetOptions opts;
  opts.views = 1;
  Dataset ds = make_dataset(specs, opts);
  const Sample& s = ds.samples[0];

  Rng rng(1);
  Sample same = augment(s, 0, 0.0, rng);
  for (size_t i = 0; i < s.image.pixels.size(); ++i)
    CHECK(same.image.pixels[i] == s.image.pixels[i]);

  // A +3 shift followed by -3 restores everything away from the border.
  Sample shifted = s;
  {
    const int h = s.image.height, w = s.image.width;
    std::fill(shifted.image.pixels.begin(), shifted.image.pixels.end(), 0.0f);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x - 3 >= 0) shifted.image.at(y, x) = s.image.at(y, x - 3);
    Sample unshifted = shifted;
    std::fill(unshifted.image.pixels.begin(), unshifted.image.pixels.end(), 0.0f);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (x + 3 < w) unshifted.image.at(y, x) = shifted.image.at(y, x + 3);
    for (int y = 0; y < h; ++y)
      for (int x = 3; x < w - 3; ++x) CHECK(unshifted.image.at(y, x) == s.image.at(y, x));
  }

  // Depth shifts touch only the foreground and stay clamped.
  Rng rng2(2);
  Sample deep = augment(s, 0, 0.25, rng2);
  for (size_t i = 0; i < s.image.pixels.size(); ++i) {
    if (s.image.pixels[i] == 0.0f)
      CHECK(deep.image.pixels[i] == 0.0f);
    else {
      CHECK(deep.image.pixels[i] >= 0.0f);
      CHECK(deep.image.pixels[i] <= 1.0f);
    }
  }

  // Large-image sweeps support +-30 px shifts.
  Sample big;
  big.image.height = big.image.width = 96;
  big.image.channels = 1;
  big.image.pixels.assign(96 * 96, 0.5f);
  Rng rng3(3);
  Sample moved = augment(big, 30, 0.0, rng3);
  CHECK(moved.image.pixels.size() == big.image.pixels.size());
  CHECK_THROWS_AS(augment(big, 96, 0.0, rng3), Error);
}
