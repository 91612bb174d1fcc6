#pragma once

#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/run_config.hpp"

namespace i2i {

struct TrainStats {
  double first_epoch_loss = 0.0;
  double final_loss = 0.0;
  int epochs = 0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  std::string log_path;
};

// SGD with Nesterov momentum over the variant picked by the config. Reads
// <data>/train.i2id (or the file named by `data` directly), writes
// checkpoint.i2iw, config.txt and train.log under cfg.out.
TrainStats train(const RunConfig& cfg);

struct EvalMetrics {
  double median_err_deg = std::numeric_limits<double>::quiet_NaN();
  double mean_err_deg = std::numeric_limits<double>::quiet_NaN();
  double acc = std::numeric_limits<double>::quiet_NaN();   // percent
  double map = std::numeric_limits<double>::quiet_NaN();   // fraction
};

// Pose: median/mean symmetry-aware geodesic error in degrees. Cls: accuracy
// and macro-averaged one-vs-rest average precision. cfg.shift_px and
// cfg.shift_depth act as test-time perturbations here.
EvalMetrics evaluate(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& dataset_path);

// Procedural dataset generation: writes train.i2id and test.i2id (80/20 by
// instance id) under cfg.out.
void gen_data(const RunConfig& cfg);

struct AblateSpec {
  std::vector<std::string> variants = {"i2i", "no-groupconv"};
  std::vector<int> view_counts = {60, 15};
  int seeds = 1;
  std::string sweep = "none";  // none | px | depth
};

// Trains/evaluates every grid cell, appending one CSV row per cell; a failed
// cell is recorded as a NaN row and the grid continues.
void ablate(const RunConfig& base, const AblateSpec& spec, const std::string& out_csv);

inline const char* kResultsCsvHeader = "variant,task,views,seed,median_err_deg,mean_err_deg,acc,map";

std::string csv_row(const std::string& variant, Task task, int views, std::uint64_t seed,
                    const EvalMetrics& m);

// Per-instance deterministic view subsampling (the paper's fewer-view
// conditions come from subsampling the 60-view files).
std::vector<int> subsample_views(const Dataset& ds, int views, std::uint64_t seed);

}  // namespace i2i
