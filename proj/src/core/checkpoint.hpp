#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace i2i {

// Named f32 weight blobs: a manifest of (name, shape) entries followed by the
// flat little-endian data in manifest order. Magic "I2IW", version 1.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// Bridges to any model exposing visit(fn(name, Tensor<T>&)).
template <typename M>
std::vector<CheckpointEntry> checkpoint_entries(M& model) {
  std::vector<CheckpointEntry> out;
  model.visit([&](const std::string& name, auto& t) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape;
    e.data.resize(t.size());
    for (std::int64_t i = 0; i < t.size(); ++i) e.data[i] = static_cast<float>(t.ptr()[i]);
    out.push_back(std::move(e));
  });
  return out;
}

template <typename M>
void apply_checkpoint(M& model, const std::vector<CheckpointEntry>& entries) {
  size_t at = 0;
  model.visit([&](const std::string& name, auto& t) {
    require(at < entries.size(), ErrorCode::Io, "checkpoint: missing tensor " + name);
    const CheckpointEntry& e = entries[at++];
    require(e.name == name, ErrorCode::Io,
            "checkpoint: expected tensor '" + name + "', found '" + e.name + "'");
    require(e.shape == t.shape, ErrorCode::ShapeMismatch,
            "checkpoint: tensor " + name + " has shape " + shape_str(e.shape) +
                ", model wants " + shape_str(t.shape));
    for (std::int64_t i = 0; i < t.size(); ++i)
      t.ptr()[i] = static_cast<std::remove_reference_t<decltype(t.ptr()[0])>>(e.data[i]);
  });
  require(at == entries.size(), ErrorCode::Io, "checkpoint: trailing tensors in file");
}

}  // namespace i2i
