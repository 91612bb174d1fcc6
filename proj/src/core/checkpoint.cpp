#include "core/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace i2i {

namespace {

constexpr char kMagic[4] = {'I', '2', 'I', 'W'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

void put(std::FILE* f, const void* p, size_t n, const std::string& path) {
  require(std::fwrite(p, 1, n, f) == n, ErrorCode::Io, "short write to " + path);
}

void get(std::FILE* f, void* p, size_t n, const std::string& path) {
  require(std::fread(p, 1, n, f) == n, ErrorCode::Io, "short read from " + path);
}

void put_u32(std::FILE* f, std::uint32_t v, const std::string& path) { put(f, &v, 4, path); }

std::uint32_t get_u32(std::FILE* f, const std::string& path) {
  std::uint32_t v = 0;
  get(f, &v, 4, path);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  require(f != nullptr, ErrorCode::Io, "cannot open " + path + " for writing");
  put(f.get(), kMagic, 4, path);
  put_u32(f.get(), kVersion, path);
  put_u32(f.get(), static_cast<std::uint32_t>(entries.size()), path);
  for (const auto& e : entries) {
    put_u32(f.get(), static_cast<std::uint32_t>(e.name.size()), path);
    put(f.get(), e.name.data(), e.name.size(), path);
    put_u32(f.get(), static_cast<std::uint32_t>(e.shape.size()), path);
    for (int d : e.shape) put_u32(f.get(), static_cast<std::uint32_t>(d), path);
  }
  for (const auto& e : entries) {
    require(static_cast<std::int64_t>(e.data.size()) == numel(e.shape), ErrorCode::ShapeMismatch,
            "checkpoint: entry " + e.name + " data does not match its shape");
    put(f.get(), e.data.data(), e.data.size() * sizeof(float), path);
  }
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  require(f != nullptr, ErrorCode::Io, "cannot open " + path);
  char magic[4];
  get(f.get(), magic, 4, path);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorCode::Io, path + ": not a checkpoint file");
  std::uint32_t version = get_u32(f.get(), path);
  require(version == kVersion, ErrorCode::Io,
          path + ": unsupported checkpoint version " + std::to_string(version));
  std::uint32_t count = get_u32(f.get(), path);
  std::vector<CheckpointEntry> entries(count);
  for (auto& e : entries) {
    std::uint32_t len = get_u32(f.get(), path);
    require(len <= 4096, ErrorCode::Io, path + ": implausible tensor name length");
    e.name.resize(len);
    get(f.get(), e.name.data(), len, path);
    std::uint32_t ndim = get_u32(f.get(), path);
    require(ndim <= 8, ErrorCode::Io, path + ": implausible tensor rank");
    e.shape.resize(ndim);
    for (auto& d : e.shape) d = static_cast<int>(get_u32(f.get(), path));
  }
  for (auto& e : entries) {
    e.data.resize(numel(e.shape));
    get(f.get(), e.data.data(), e.data.size() * sizeof(float), path);
  }
  return entries;
}

}  // namespace i2i
