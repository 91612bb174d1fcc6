#include "core/encoder.hpp"

#include <cmath>

namespace i2i {

namespace {

// Source position when rotating a k x k kernel by r*90 degrees ccw, matching
// the rotate90 op in tensor.hpp.
inline std::pair<int, int> rot_src(int r, int y, int x, int size) {
  switch (r & 3) {
    case 1: return {x, size - 1 - y};
    case 2: return {size - 1 - y, size - 1 - x};
    case 3: return {size - 1 - x, y};
    default: return {y, x};
  }
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double bound, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t.ptr()[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

double fan_in_bound(int fan_in, double gain) { return gain * std::sqrt(3.0 / fan_in); }

}  // namespace

std::vector<std::int64_t> c4_lift_table(int cout, int cin, int k) {
  std::vector<std::int64_t> idx(static_cast<size_t>(cout) * 4 * cin * k * k);
  std::int64_t at = 0;
  for (int co = 0; co < cout; ++co)
    for (int ro = 0; ro < 4; ++ro)
      for (int ci = 0; ci < cin; ++ci)
        for (int y = 0; y < k; ++y)
          for (int x = 0; x < k; ++x) {
            auto [sy, sx] = rot_src(ro, y, x, k);
            idx[at++] = (static_cast<std::int64_t>(co) * cin + ci) * k * k + sy * k + sx;
          }
  return idx;
}

std::vector<std::int64_t> c4_group_table(int cout, int cin, int k) {
  std::vector<std::int64_t> idx(static_cast<size_t>(cout) * 4 * cin * 4 * k * k);
  std::int64_t at = 0;
  for (int co = 0; co < cout; ++co)
    for (int ro = 0; ro < 4; ++ro)
      for (int ci = 0; ci < cin; ++ci)
        for (int ri = 0; ri < 4; ++ri) {
          int rel = ((ri - ro) % 4 + 4) % 4;
          std::int64_t base =
              ((static_cast<std::int64_t>(co) * cin + ci) * 4 + rel) * k * k;
          for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x) {
              auto [sy, sx] = rot_src(ro, y, x, k);
              idx[at++] = base + sy * k + sx;
            }
        }
  return idx;
}

std::vector<std::int64_t> c4_bias_table(int cout) {
  std::vector<std::int64_t> idx(static_cast<size_t>(cout) * 4);
  for (int co = 0; co < cout; ++co)
    for (int r = 0; r < 4; ++r) idx[co * 4 + r] = co;
  return idx;
}

EncoderWidths encoder_widths(const EncoderConfig& cfg) {
  // Plain widths are doubled so trainable parameter counts stay within a few
  // percent of the weight-tied equivariant stack.
  EncoderWidths w;
  int b = cfg.base_channels * (cfg.equivariant ? 1 : 2);
  w.ch.push_back(b);
  for (int i = 0; i < cfg.blocks; ++i) w.ch.push_back(std::min(4 * b, b << (i + 1)));
  return w;
}

template <typename T>
Encoder<T> Encoder<T>::init(const EncoderConfig& cfg, Rng& rng) {
  Encoder<T> e;
  e.cfg = cfg;
  EncoderWidths w = encoder_widths(cfg);
  const int ks = 3;
  const double gain = std::sqrt(2.0);

  if (cfg.equivariant) {
    e.lift_w = uniform_init<T>({w.ch[0], 1, ks, ks}, fan_in_bound(1 * ks * ks, gain), rng);
    e.lift_b = Tensor<T>::zeros({w.ch[0]});
    e.lift_tab = std::make_shared<const std::vector<std::int64_t>>(c4_lift_table(w.ch[0], 1, ks));
    e.lift_btab = std::make_shared<const std::vector<std::int64_t>>(c4_bias_table(w.ch[0]));
    for (int i = 0; i < cfg.blocks; ++i) {
      int cin = w.ch[i], cout = w.ch[i + 1];
      e.block_w.push_back(
          uniform_init<T>({cout, cin, 4, ks, ks}, fan_in_bound(cin * 4 * ks * ks, gain), rng));
      e.block_b.push_back(Tensor<T>::zeros({cout}));
      e.block_tab.push_back(
          std::make_shared<const std::vector<std::int64_t>>(c4_group_table(cout, cin, ks)));
      e.block_btab.push_back(
          std::make_shared<const std::vector<std::int64_t>>(c4_bias_table(cout)));
    }
    e.head_w = uniform_init<T>({cfg.out_channels, w.ch.back(), 1, 1},
                               fan_in_bound(w.ch.back(), 1.0), rng);
  } else {
    e.lift_w = uniform_init<T>({w.ch[0], 1, ks, ks}, fan_in_bound(1 * ks * ks, gain), rng);
    e.lift_b = Tensor<T>::zeros({w.ch[0]});
    for (int i = 0; i < cfg.blocks; ++i) {
      int cin = w.ch[i], cout = w.ch[i + 1];
      e.block_w.push_back(
          uniform_init<T>({cout, cin, ks, ks}, fan_in_bound(cin * ks * ks, gain), rng));
      e.block_b.push_back(Tensor<T>::zeros({cout}));
    }
    e.head_w = uniform_init<T>({cfg.out_channels, w.ch.back(), 1, 1},
                               fan_in_bound(w.ch.back(), 1.0), rng);
  }
  e.head_b = Tensor<T>::zeros({cfg.out_channels});
  return e;
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& image) const {
  require(image.shape.size() == 3 && image.shape[0] == 1, ErrorCode::ShapeMismatch,
          "encoder: expected (1, H, W) image, got " + shape_str(image.shape));
  EncoderWidths w = encoder_widths(cfg);
  const int ks = 3;
  Tensor<T> x = image;

  if (cfg.equivariant) {
    Tensor<T> kfull = index_select(lift_w, lift_tab, {w.ch[0] * 4, 1, ks, ks});
    Tensor<T> bfull = index_select(lift_b, lift_btab, {w.ch[0] * 4});
    x = relu(conv2d(x, kfull, bfull));
    for (int i = 0; i < cfg.blocks; ++i) {
      if (i < 2) x = avgpool2x2(x);  // downsample by 4 total, 2x2 means stay C4-exact
      int cin = w.ch[i], cout = w.ch[i + 1];
      Tensor<T> kb = index_select(block_w[i], block_tab[i], {cout * 4, cin * 4, ks, ks});
      Tensor<T> bb = index_select(block_b[i], block_btab[i], {cout * 4});
      x = relu(conv2d(x, kb, bb));
    }
    x = mean_channel_groups(x, 4);  // trivial representation
  } else {
    x = relu(conv2d(x, lift_w, lift_b));
    for (int i = 0; i < cfg.blocks; ++i) {
      if (i < 2) x = avgpool2x2(x);
      x = relu(conv2d(x, block_w[i], block_b[i]));
    }
  }
  return conv2d(x, head_w, head_b);
}

template struct Encoder<float>;
template struct Encoder<double>;

}  // namespace i2i
