#include "core/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/threading.hpp"

namespace i2i {

namespace {

namespace fs = std::filesystem;

std::shared_ptr<const IcoGroup> shared_group() {
  static std::shared_ptr<const IcoGroup> g = std::make_shared<IcoGroup>(build_group());
  return g;
}

std::string train_file(const std::string& data) {
  if (data.size() > 5 && data.substr(data.size() - 5) == ".i2id") return data;
  return data + "/train.i2id";
}

int count_classes(const Dataset& ds) {
  std::uint32_t mx = 0;
  for (const auto& s : ds.samples) mx = std::max(mx, s.class_id);
  return static_cast<int>(mx) + 1;
}

ModelConfig model_config(const RunConfig& cfg, const Dataset& ds) {
  ModelConfig mc;
  mc.task = cfg.task;
  mc.variant = cfg.variant;
  mc.image_size = ds.height;
  mc.base_channels = cfg.base_channels;
  mc.num_classes = cfg.task == Task::Cls ? count_classes(ds) : 1;
  mc.n = cfg.sphere_channels;
  mc.sigma = cfg.sigma;
  mc.coverage = cfg.coverage;
  require(ds.height == ds.width, ErrorCode::InvalidArgument, "non-square images unsupported");
  return mc;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2);
  return a;
}

double lr_at(const RunConfig& cfg, int epoch, int total) {
  // Steps of 0.1 at 50% and 75% of the schedule, floored.
  int drops = 0;
  if (epoch >= total / 2) ++drops;
  if (epoch >= (3 * total) / 4) ++drops;
  return std::max(cfg.lr * std::pow(0.1, drops), cfg.lr_floor);
}

template <typename T>
struct FlatParams {
  std::vector<Tensor<T>*> tensors;
  std::vector<std::int64_t> offsets;
  std::int64_t total = 0;
};

template <typename T>
FlatParams<T> flatten(Model<T>& model) {
  FlatParams<T> fp;
  model.visit([&](const std::string&, Tensor<T>& t) {
    fp.tensors.push_back(&t);
    fp.offsets.push_back(fp.total);
    fp.total += t.size();
  });
  return fp;
}

template <typename T>
TrainStats train_impl(const RunConfig& cfg) {
  auto t_start = std::chrono::steady_clock::now();
  Dataset ds = read_dataset(train_file(cfg.data));
  require(!ds.samples.empty(), ErrorCode::InvalidArgument, "training set is empty");

  std::vector<int> indices = subsample_views(ds, cfg.views, cfg.seed);

  Rng init_rng(cfg.seed);
  auto group = shared_group();
  Model<T> model = Model<T>::init(model_config(cfg, ds), group, init_rng);
  FlatParams<T> fp = flatten(model);

  fs::create_directories(cfg.out);
  std::string log_path = cfg.out + "/train.log";
  std::ofstream log(log_path);
  require(log.good(), ErrorCode::Io, "cannot open " + log_path);
  {
    std::ofstream echo(cfg.out + "/config.txt");
    echo << cfg.echo();
  }

  std::vector<double> velocity(fp.total, 0.0);
  std::vector<double> gsum(fp.total, 0.0);
  const int epochs = cfg.effective_epochs();
  const int n = static_cast<int>(indices.size());
  TrainStats stats;
  stats.epochs = epochs;

  // Per-sample gradient slots keep accumulation order independent of the
  // thread count.
  std::vector<std::vector<T>> slots(cfg.batch);
  std::vector<double> slot_loss(cfg.batch), slot_cls(cfg.batch), slot_reg(cfg.batch);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    auto t_epoch = std::chrono::steady_clock::now();
    double lr = lr_at(cfg, epoch, epochs);
    std::vector<int> order = indices;
    Rng shuffle_rng(mix(cfg.seed, 0xE90C'0000ULL + epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0, epoch_cls = 0.0, epoch_reg = 0.0;
    for (int start = 0; start < n; start += cfg.batch) {
      int bn = std::min(cfg.batch, n - start);
      int batch_id = start / cfg.batch;
      parallel_for(bn, cfg.threads, [&](std::int64_t bi) {
        const Sample& raw = ds.samples[order[start + bi]];
        Rng aug_rng(mix(mix(cfg.seed, epoch * 1000003ULL), order[start + bi]));
        Sample s = augment(raw, cfg.shift_px, cfg.shift_depth, aug_rng);

        Tape<T> tape;
        Model<T> live = model.attach(tape);
        auto out = live.loss(image_tensor<T>(s.image), s.label, static_cast<int>(s.class_id),
                             cfg.lambda);
        tape.backward(out.total);

        auto& slot = slots[bi];
        slot.assign(fp.total, T(0));
        FlatParams<T> lp = flatten(live);
        for (size_t ti = 0; ti < lp.tensors.size(); ++ti) {
          const auto& g = tape.grad(*lp.tensors[ti]);
          std::copy(g.begin(), g.end(), slot.begin() + lp.offsets[ti]);
        }
        slot_loss[bi] = out.total.item();
        slot_cls[bi] = out.cls;
        slot_reg[bi] = out.reg;
      });

      std::fill(gsum.begin(), gsum.end(), 0.0);
      for (int bi = 0; bi < bn; ++bi) {
        require(std::isfinite(slot_loss[bi]), ErrorCode::Runtime,
                "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch_id) + ", sample " + std::to_string(order[start + bi]));
        for (std::int64_t i = 0; i < fp.total; ++i) gsum[i] += slots[bi][i];
        epoch_loss += slot_loss[bi];
        epoch_cls += slot_cls[bi];
        epoch_reg += slot_reg[bi];
      }

      // Nesterov momentum; gsum is reused to stage the packed step.
      for (std::int64_t i = 0; i < fp.total; ++i) {
        double g = gsum[i] / bn;
        velocity[i] = cfg.momentum * velocity[i] + g;
        gsum[i] = lr * (g + cfg.momentum * velocity[i]);
      }
      std::int64_t at = 0;
      for (size_t ti = 0; ti < fp.tensors.size(); ++ti) {
        T* w = fp.tensors[ti]->ptr();
        for (std::int64_t i = 0; i < fp.tensors[ti]->size(); ++i, ++at)
          w[i] -= static_cast<T>(gsum[at]);
      }
    }

    epoch_loss /= n;
    epoch_cls /= n;
    epoch_reg /= n;
    if (epoch == 0) stats.first_epoch_loss = epoch_loss;
    stats.final_loss = epoch_loss;
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    log << "epoch=" << epoch << " loss=" << epoch_loss << " cls=" << epoch_cls
        << " reg=" << epoch_reg << " lr=" << lr << " wall_s=" << wall << "\n";
    log.flush();
  }

  stats.checkpoint_path = cfg.out + "/checkpoint.i2iw";
  auto entries = checkpoint_entries(model);
  write_checkpoint(stats.checkpoint_path, entries);
  stats.log_path = log_path;
  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return stats;
}

template <typename T>
EvalMetrics evaluate_impl(const RunConfig& cfg, const std::string& checkpoint_path,
                          const std::string& dataset_path) {
  Dataset ds = read_dataset(dataset_path);
  require(!ds.samples.empty(), ErrorCode::InvalidArgument, "evaluation set is empty");

  Rng init_rng(cfg.seed);
  auto group = shared_group();
  Model<T> model = Model<T>::init(model_config(cfg, ds), group, init_rng);
  apply_checkpoint(model, read_checkpoint(checkpoint_path));

  const int n = static_cast<int>(ds.samples.size());
  EvalMetrics out;
  SymmetrySpec sym = cfg.symmetry();

  if (cfg.task == Task::Pose) {
    std::vector<double> errs(n);
    parallel_for(n, cfg.threads, [&](std::int64_t i) {
      Sample s = ds.samples[i];
      if (cfg.shift_px > 0 || cfg.shift_depth > 0.0) {
        Rng rng(mix(cfg.seed, 0xE7A1'0000ULL + i));
        s = augment(s, cfg.shift_px, cfg.shift_depth, rng);
      }
      Rotation pred = model.predict_pose(image_tensor<T>(s.image));
      errs[i] = symmetry_aware_error(pred, s.label, sym) * 180.0 / M_PI;
    });
    std::sort(errs.begin(), errs.end());
    out.median_err_deg = n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
    double total = 0.0;
    for (double e : errs) total += e;
    out.mean_err_deg = total / n;
    return out;
  }

  const int classes = model.cfg.num_classes;
  std::vector<std::vector<double>> scores(n);
  parallel_for(n, cfg.threads, [&](std::int64_t i) {
    Sample s = ds.samples[i];
    if (cfg.shift_px > 0 || cfg.shift_depth > 0.0) {
      Rng rng(mix(cfg.seed, 0xE7A1'0000ULL + i));
      s = augment(s, cfg.shift_px, cfg.shift_depth, rng);
    }
    scores[i] = model.predict_class_scores(image_tensor<T>(s.image));
  });

  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int c = 1; c < classes; ++c)
      if (scores[i][c] > scores[i][arg]) arg = c;
    if (arg == static_cast<int>(ds.samples[i].class_id)) ++correct;
  }
  out.acc = 100.0 * correct / n;

  // Macro-averaged one-vs-rest average precision over softmax scores.
  double ap_total = 0.0;
  int ap_classes = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return scores[a][c] > scores[b][c]; });
    int positives = 0;
    for (const auto& s : ds.samples) positives += s.class_id == static_cast<std::uint32_t>(c);
    if (positives == 0) continue;
    int hit = 0;
    double ap = 0.0;
    for (int k = 0; k < n; ++k) {
      if (ds.samples[idx[k]].class_id == static_cast<std::uint32_t>(c)) {
        ++hit;
        ap += static_cast<double>(hit) / (k + 1);
      }
    }
    ap_total += ap / positives;
    ++ap_classes;
  }
  out.map = ap_classes > 0 ? ap_total / ap_classes : 0.0;
  return out;
}

}  // namespace

std::vector<int> subsample_views(const Dataset& ds, int views, std::uint64_t seed) {
  std::vector<int> indices;
  if (views <= 0) {
    indices.resize(ds.samples.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    return indices;
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<int>> per_instance;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    per_instance[{ds.samples[i].class_id, ds.samples[i].instance_id}].push_back(
        static_cast<int>(i));
  for (auto& [key, list] : per_instance) {
    Rng rng(mix(mix(seed, key.first), key.second ^ 0x5EEDULL));
    rng.shuffle(list.begin(), list.end());
    int keep = std::min<int>(views, static_cast<int>(list.size()));
    for (int i = 0; i < keep; ++i) indices.push_back(list[i]);
  }
  std::sort(indices.begin(), indices.end());
  return indices;
}

TrainStats train(const RunConfig& cfg) {
  cfg.validate();
  return cfg.precision == "f64" ? train_impl<double>(cfg) : train_impl<float>(cfg);
}

EvalMetrics evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& dataset_path) {
  cfg.validate();
  return cfg.precision == "f64" ? evaluate_impl<double>(cfg, checkpoint_path, dataset_path)
                                : evaluate_impl<float>(cfg, checkpoint_path, dataset_path);
}

void gen_data(const RunConfig& cfg) {
  cfg.validate();
  auto group = shared_group();

  std::vector<std::string> names;
  std::string acc;
  for (char ch : cfg.classes + ",") {
    if (ch == ',') {
      if (!acc.empty()) names.push_back(acc);
      acc.clear();
    } else {
      acc += ch;
    }
  }
  require(!names.empty(), ErrorCode::InvalidArgument, "classes: empty class list");

  std::vector<ShapeSpec> specs;
  for (std::uint32_t cid = 0; cid < names.size(); ++cid) {
    auto cls = gen_shapes(names[cid], cid, cfg.instances, mix(cfg.seed, 0x51ED'0000ULL + cid),
                          *group, cfg.guard_threshold);
    for (auto& s : cls) s.instance_id = cid * cfg.instances + s.instance_id;
    specs.insert(specs.end(), cls.begin(), cls.end());
  }

  DatasetOptions opts;
  opts.views = cfg.gen_views;
  opts.height = opts.width = cfg.image_size;
  opts.mode = cfg.render_mode();
  opts.coverage = cfg.render_coverage;
  opts.sym = cfg.symmetry();
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  Dataset all = make_dataset(specs, opts);

  Dataset train_ds, test_ds;
  split_dataset(all, &train_ds, &test_ds);
  std::filesystem::create_directories(cfg.out);
  write_dataset(cfg.out + "/train.i2id", train_ds);
  write_dataset(cfg.out + "/test.i2id", test_ds);
}

std::string csv_row(const std::string& variant, Task task, int views, std::uint64_t seed,
                    const EvalMetrics& m) {
  std::ostringstream os;
  os << variant << "," << to_string(task) << "," << views << "," << seed << ","
     << m.median_err_deg << "," << m.mean_err_deg << "," << m.acc << "," << m.map;
  return os.str();
}

void ablate(const RunConfig& base, const AblateSpec& spec, const std::string& out_csv) {
  base.validate();
  fs::create_directories(base.out);
  if (fs::path(out_csv).has_parent_path())
    fs::create_directories(fs::path(out_csv).parent_path());
  std::ofstream csv(out_csv);
  require(csv.good(), ErrorCode::Io, "cannot open " + out_csv);
  csv << kResultsCsvHeader << "\n";

  auto run_cell = [&](const RunConfig& cfg, const std::string& label, int views) {
    try {
      TrainStats ts = train(cfg);
      RunConfig eval_cfg = cfg;
      eval_cfg.shift_px = 0;
      eval_cfg.shift_depth = 0.0;
      EvalMetrics m = evaluate(eval_cfg, ts.checkpoint_path, cfg.data + "/test.i2id");
      csv << csv_row(label, cfg.task, views, cfg.seed, m) << "\n";
    } catch (const std::exception& e) {
      csv << csv_row(label, cfg.task, views, cfg.seed, EvalMetrics{}) << "\n";
    }
    csv.flush();
  };

  if (spec.sweep == "none") {
    for (const auto& vname : spec.variants) {
      for (int views : spec.view_counts) {
        for (int s = 0; s < spec.seeds; ++s) {
          RunConfig cfg = base;
          cfg.variant = variant_from_string(vname);
          cfg.views = views;
          cfg.seed = base.seed + s;
          cfg.out = base.out + "/ablate_" + vname + "_v" + std::to_string(views) + "_s" +
                    std::to_string(s);
          run_cell(cfg, vname, views);
        }
      }
    }
    return;
  }

  // Shift sweeps: one model trained with the full-magnitude augmentation,
  // evaluated under increasing test-time perturbations.
  const bool px = spec.sweep == "px";
  require(px || spec.sweep == "depth", ErrorCode::InvalidArgument,
          "sweep must be none|px|depth");
  RunConfig cfg = base;
  cfg.out = base.out + "/sweep_" + spec.sweep;
  if (px) {
    cfg.shift_px = 30;
    cfg.shift_depth = 0.0;
  } else {
    cfg.shift_px = 0;
    cfg.shift_depth = 0.30;
  }
  TrainStats ts = train(cfg);
  for (int mag = 5; mag <= 30; mag += 5) {
    RunConfig ecfg = cfg;
    ecfg.shift_px = px ? mag : 0;
    ecfg.shift_depth = px ? 0.0 : mag / 100.0;
    std::string label = to_string(cfg.variant) + (px ? "-px" : "-depth") + std::to_string(mag);
    try {
      EvalMetrics m = evaluate(ecfg, ts.checkpoint_path, cfg.data + "/test.i2id");
      csv << csv_row(label, cfg.task, cfg.views, cfg.seed, m) << "\n";
    } catch (const std::exception& e) {
      csv << csv_row(label, cfg.task, cfg.views, cfg.seed, EvalMetrics{}) << "\n";
    }
    csv.flush();
  }
}

}  // namespace i2i
