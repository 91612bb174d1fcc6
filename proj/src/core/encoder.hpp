#pragma once

#include <functional>
#include <string>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace i2i {

// Desk-scale projector from images to a dense feature map. The equivariant
// flavor ties kernels across exact multiples-of-90-degree rotations (regular
// C4 representation, orientation axis folded into the channel axis as
// channel = c*4 + r), so quarter-turn equivariance holds to float precision.
// Downsampling factor is fixed at 4 (2x2 average pools after the first two
// blocks), giving the 8x8 output for 32x32 input.
struct EncoderConfig {
  int input_size = 32;
  int base_channels = 8;
  int blocks = 3;
  bool equivariant = true;
  int out_channels = 112;  // k = m*n fed to the projection

  int feature_size() const { return input_size / 4; }
};

// Index table mapping the assembled lift kernel (cout*4, cin, k, k) onto the
// base tensor (cout, cin, k, k); orientation r of output channel c holds the
// base kernel rotated by r*90 degrees.
std::vector<std::int64_t> c4_lift_table(int cout, int cin, int k);

// Assembled group-conv kernel (cout*4, cin*4, k, k) from base
// (cout, cin, 4, k, k): entry (co, ro, ci, ri) is base[co][ci][(ri-ro) mod 4]
// rotated by ro*90 degrees.
std::vector<std::int64_t> c4_group_table(int cout, int cin, int k);

// Bias tied across the orientation axis: (cout) -> (cout*4).
std::vector<std::int64_t> c4_bias_table(int cout);

template <typename T>
struct Encoder {
  EncoderConfig cfg;
  Tensor<T> lift_w, lift_b;
  std::vector<Tensor<T>> block_w, block_b;
  Tensor<T> head_w, head_b;
  // Kernel-assembly index tables, fixed by the architecture.
  std::shared_ptr<const std::vector<std::int64_t>> lift_tab, lift_btab;
  std::vector<std::shared_ptr<const std::vector<std::int64_t>>> block_tab, block_btab;

  static Encoder init(const EncoderConfig& cfg, Rng& rng);

  // Shallow copy whose parameters are registered on the tape.
  Encoder attach(Tape<T>& tape) const {
    Encoder e = *this;
    e.lift_w = tape.leaf(lift_w);
    e.lift_b = tape.leaf(lift_b);
    for (auto& w : e.block_w) w = tape.leaf(w);
    for (auto& b : e.block_b) b = tape.leaf(b);
    e.head_w = tape.leaf(head_w);
    e.head_b = tape.leaf(head_b);
    return e;
  }

  void visit(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
    fn("encoder.lift.weight", lift_w);
    fn("encoder.lift.bias", lift_b);
    for (size_t i = 0; i < block_w.size(); ++i) {
      fn("encoder.block" + std::to_string(i) + ".weight", block_w[i]);
      fn("encoder.block" + std::to_string(i) + ".bias", block_b[i]);
    }
    fn("encoder.head.weight", head_w);
    fn("encoder.head.bias", head_b);
  }

  std::int64_t param_count() const {
    std::int64_t n = lift_w.size() + lift_b.size() + head_w.size() + head_b.size();
    for (const auto& w : block_w) n += w.size();
    for (const auto& b : block_b) n += b.size();
    return n;
  }

  // image: (1, H, W) -> features (out_channels, H/4, W/4).
  Tensor<T> forward(const Tensor<T>& image) const;
};

// Widths per layer; the plain variant uses pure convolutions with widths
// chosen to keep trainable parameter counts within a few percent of the
// equivariant model.
struct EncoderWidths {
  std::vector<int> ch;  // per layer: lift output, then per-block outputs
};
EncoderWidths encoder_widths(const EncoderConfig& cfg);

}  // namespace i2i
