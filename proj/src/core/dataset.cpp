#include "core/dataset.hpp"

#include <cstdio>
#include <cstring>

#include "core/error.hpp"
#include "core/threading.hpp"

namespace i2i {

namespace {

constexpr char kMagic[4] = {'I', '2', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_raw(std::FILE* f, const void* p, size_t bytes, const std::string& path) {
  require(std::fwrite(p, 1, bytes, f) == bytes, ErrorCode::Io, "short write to " + path);
}

void read_raw(std::FILE* f, void* p, size_t bytes, const std::string& path) {
  require(std::fread(p, 1, bytes, f) == bytes, ErrorCode::Io, "short read from " + path);
}

void write_u32(std::FILE* f, std::uint32_t v, const std::string& path) {
  write_raw(f, &v, 4, path);
}

std::uint32_t read_u32(std::FILE* f, const std::string& path) {
  std::uint32_t v = 0;
  read_raw(f, &v, 4, path);
  return v;
}

}  // namespace

Dataset make_dataset(const std::vector<ShapeSpec>& specs, const DatasetOptions& opts) {
  require(opts.views >= 1, ErrorCode::InvalidArgument, "make_dataset: views must be >= 1");
  Dataset ds;
  ds.height = opts.height;
  ds.width = opts.width;
  ds.channels = 1;
  ds.samples.resize(specs.size() * opts.views);

  // Labels are drawn sequentially so the stream is independent of threading.
  Rng label_rng(opts.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Rotation> views(ds.samples.size());
  for (auto& r : views) r = random_rotation(label_rng);

  const int budget = static_cast<int>(static_cast<std::int64_t>(opts.budget_at_32) *
                                      opts.height * opts.width / (32 * 32));
  parallel_for(static_cast<std::int64_t>(specs.size()), opts.threads, [&](std::int64_t si) {
    SurfaceCloud cloud = sample_surface(specs[si], budget);
    for (int v = 0; v < opts.views; ++v) {
      std::int64_t at = si * opts.views + v;
      Sample& s = ds.samples[at];
      s.image = render(cloud, views[at], opts.height, opts.width, opts.mode, opts.coverage);
      s.label = canonicalize_label(views[at], opts.sym);
      s.class_id = specs[si].class_id;
      s.instance_id = specs[si].instance_id;
    }
  });
  return ds;
}

void split_dataset(const Dataset& all, Dataset* train, Dataset* test) {
  train->height = test->height = all.height;
  train->width = test->width = all.width;
  train->channels = test->channels = all.channels;
  train->samples.clear();
  test->samples.clear();
  for (const auto& s : all.samples)
    (s.instance_id % 5 == 4 ? test : train)->samples.push_back(s);
}

void write_dataset(const std::string& path, const Dataset& ds) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  require(f != nullptr, ErrorCode::Io, "cannot open " + path + " for writing");
  write_raw(f.get(), kMagic, 4, path);
  write_u32(f.get(), kVersion, path);
  write_u32(f.get(), static_cast<std::uint32_t>(ds.samples.size()), path);
  write_u32(f.get(), static_cast<std::uint32_t>(ds.height), path);
  write_u32(f.get(), static_cast<std::uint32_t>(ds.width), path);
  write_u32(f.get(), static_cast<std::uint32_t>(ds.channels), path);
  const size_t pixels = static_cast<size_t>(ds.height) * ds.width * ds.channels;
  for (const auto& s : ds.samples) {
    require(s.image.pixels.size() == pixels, ErrorCode::ShapeMismatch,
            "write_dataset: sample image size mismatch");
    write_u32(f.get(), s.class_id, path);
    write_u32(f.get(), s.instance_id, path);
    const Quat& q = s.label.quat();
    double quat[4] = {q.w, q.x, q.y, q.z};
    write_raw(f.get(), quat, sizeof(quat), path);
    write_raw(f.get(), s.image.pixels.data(), pixels * sizeof(float), path);
  }
}

Dataset read_dataset(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  require(f != nullptr, ErrorCode::Io, "cannot open " + path);
  char magic[4];
  read_raw(f.get(), magic, 4, path);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorCode::Io, path + ": not a dataset file");
  std::uint32_t version = read_u32(f.get(), path);
  require(version == kVersion, ErrorCode::Io,
          path + ": unsupported dataset version " + std::to_string(version));
  std::uint32_t count = read_u32(f.get(), path);
  Dataset ds;
  ds.height = static_cast<int>(read_u32(f.get(), path));
  ds.width = static_cast<int>(read_u32(f.get(), path));
  ds.channels = static_cast<int>(read_u32(f.get(), path));
  require(ds.height > 0 && ds.width > 0 && ds.channels == 1, ErrorCode::Io,
          path + ": bad dataset header");
  const size_t pixels = static_cast<size_t>(ds.height) * ds.width * ds.channels;
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.class_id = read_u32(f.get(), path);
    s.instance_id = read_u32(f.get(), path);
    double quat[4];
    read_raw(f.get(), quat, sizeof(quat), path);
    s.label = Rotation::from_quat({quat[0], quat[1], quat[2], quat[3]});
    s.image.height = ds.height;
    s.image.width = ds.width;
    s.image.channels = ds.channels;
    s.image.pixels.resize(pixels);
    read_raw(f.get(), s.image.pixels.data(), pixels * sizeof(float), path);
  }
  return ds;
}

Sample augment(const Sample& s, int max_shift_px, double depth_shift_frac, Rng& rng) {
  Sample out = s;
  int dx = 0, dy = 0;
  if (max_shift_px > 0) {
    require(max_shift_px < s.image.width && max_shift_px < s.image.height,
            ErrorCode::InvalidArgument, "augment: shift exceeds image bounds");
    dx = static_cast<int>(rng.uniform_index(2 * max_shift_px + 1)) - max_shift_px;
    dy = static_cast<int>(rng.uniform_index(2 * max_shift_px + 1)) - max_shift_px;
  }
  double dd = depth_shift_frac != 0.0 ? rng.uniform(-depth_shift_frac, depth_shift_frac) : 0.0;

  const int h = s.image.height, w = s.image.width, c = s.image.channels;
  std::fill(out.image.pixels.begin(), out.image.pixels.end(), 0.0f);
  for (int y = 0; y < h; ++y) {
    int sy = y - dy;
    if (sy < 0 || sy >= h) continue;
    for (int x = 0; x < w; ++x) {
      int sx = x - dx;
      if (sx < 0 || sx >= w) continue;
      for (int ch = 0; ch < c; ++ch) {
        float v = s.image.at(sy, sx, ch);
        if (v > 0.0f && dd != 0.0)
          v = static_cast<float>(std::clamp(static_cast<double>(v) + dd, 0.0, 1.0));
        out.image.at(y, x, ch) = v;
      }
    }
  }
  return out;
}

}  // namespace i2i
