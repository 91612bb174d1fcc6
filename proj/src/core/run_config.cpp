#include "core/run_config.hpp"

#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace i2i {

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    require(pos == v.size(), ErrorCode::InvalidArgument, "");
    return out;
  } catch (...) {
    throw_error(ErrorCode::InvalidArgument, key + ": '" + v + "' is not an integer");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    require(pos == v.size(), ErrorCode::InvalidArgument, "");
    return out;
  } catch (...) {
    throw_error(ErrorCode::InvalidArgument, key + ": '" + v + "' is not a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    std::uint64_t out = std::stoull(v, &pos);
    require(pos == v.size(), ErrorCode::InvalidArgument, "");
    return out;
  } catch (...) {
    throw_error(ErrorCode::InvalidArgument, key + ": '" + v + "' is not an unsigned integer");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

SymmetrySpec RunConfig::symmetry() const {
  if (sym == "none") return SymmetrySpec::none();
  if (sym == "continuous") return SymmetrySpec::continuous_z();
  if (sym.rfind("cyclic:", 0) == 0) return SymmetrySpec::cyclic_z(to_int("sym", sym.substr(7)));
  throw_error(ErrorCode::InvalidArgument,
              "sym: '" + sym + "' (expected none|cyclic:N|continuous)");
}

RenderMode RunConfig::render_mode() const {
  if (mode == "depth") return RenderMode::Depth;
  if (mode == "gray") return RenderMode::Gray;
  throw_error(ErrorCode::InvalidArgument, "mode: '" + mode + "' (expected depth|gray)");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "task") task = task_from_string(value);
  else if (key == "variant") variant = variant_from_string(value);
  else if (key == "data") data = value;
  else if (key == "out") out = value;
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "batch") batch = to_int(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "lr_floor") lr_floor = to_double(key, value);
  else if (key == "momentum") momentum = to_double(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "sigma") sigma = to_double(key, value);
  else if (key == "coverage") coverage = to_double(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "views") views = to_int(key, value);
  else if (key == "shift_px") shift_px = to_int(key, value);
  else if (key == "shift_depth") shift_depth = to_double(key, value);
  else if (key == "threads") threads = to_int(key, value);
  else if (key == "precision") precision = value;
  else if (key == "base_channels") base_channels = to_int(key, value);
  else if (key == "sphere_channels") sphere_channels = to_int(key, value);
  else if (key == "classes") classes = value;
  else if (key == "instances") instances = to_int(key, value);
  else if (key == "gen_views") gen_views = to_int(key, value);
  else if (key == "image_size") image_size = to_int(key, value);
  else if (key == "mode") mode = value;
  else if (key == "sym") sym = value;
  else if (key == "render_coverage") render_coverage = to_double(key, value);
  else if (key == "guard_threshold") guard_threshold = to_double(key, value);
  else throw_error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            path + ":" + std::to_string(lineno) + ": expected key=value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::validate() const {
  require(batch >= 1, ErrorCode::InvalidArgument, "batch must be >= 1");
  require(epochs >= 0, ErrorCode::InvalidArgument, "epochs must be >= 0");
  require(lr > 0.0, ErrorCode::InvalidArgument, "lr must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::InvalidArgument,
          "momentum must be in [0, 1)");
  require(lambda >= 0.0, ErrorCode::InvalidArgument, "lambda must be >= 0");
  require(sigma > 0.0, ErrorCode::InvalidArgument, "sigma must be positive");
  require(coverage > 0.0 && coverage <= 1.0, ErrorCode::InvalidArgument,
          "coverage must be in (0, 1]");
  require(views >= 0, ErrorCode::InvalidArgument, "views must be >= 0");
  require(shift_px >= 0, ErrorCode::InvalidArgument, "shift_px must be >= 0");
  require(shift_depth >= 0.0 && shift_depth < 1.0, ErrorCode::InvalidArgument,
          "shift_depth must be in [0, 1)");
  require(threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
  require(precision == "f32" || precision == "f64", ErrorCode::InvalidArgument,
          "precision must be f32 or f64");
  require(base_channels >= 1, ErrorCode::InvalidArgument, "base_channels must be >= 1");
  require(sphere_channels >= 1, ErrorCode::InvalidArgument, "sphere_channels must be >= 1");
  require(instances >= 1, ErrorCode::InvalidArgument, "instances must be >= 1");
  require(gen_views >= 1, ErrorCode::InvalidArgument, "gen_views must be >= 1");
  require(image_size >= 8 && image_size % 4 == 0, ErrorCode::InvalidArgument,
          "image_size must be >= 8 and divisible by 4");
  require(render_coverage > 0.0 && render_coverage <= 1.0, ErrorCode::InvalidArgument,
          "render_coverage must be in (0, 1]");
  require(guard_threshold >= 0.0, ErrorCode::InvalidArgument, "guard_threshold must be >= 0");
  symmetry();
  render_mode();
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os << "task=" << to_string(task) << "\nvariant=" << to_string(variant) << "\ndata=" << data
     << "\nout=" << out << "\nepochs=" << epochs << "\nbatch=" << batch << "\nlr=" << lr
     << "\nlr_floor=" << lr_floor << "\nmomentum=" << momentum << "\nlambda=" << lambda
     << "\nsigma=" << sigma << "\ncoverage=" << coverage << "\nseed=" << seed
     << "\nviews=" << views << "\nshift_px=" << shift_px << "\nshift_depth=" << shift_depth
     << "\nthreads=" << threads << "\nprecision=" << precision
     << "\nbase_channels=" << base_channels << "\nsphere_channels=" << sphere_channels
     << "\nclasses=" << classes << "\ninstances=" << instances << "\ngen_views=" << gen_views
     << "\nimage_size=" << image_size << "\nmode=" << mode << "\nsym=" << sym
     << "\nrender_coverage=" << render_coverage << "\nguard_threshold=" << guard_threshold
     << "\n";
  return os.str();
}

}  // namespace i2i
