#pragma once

#include <functional>
#include <map>
#include <string>

#include "depthlab/adversarial.hpp"
#include "depthlab/data.hpp"
#include "depthlab/eval.hpp"
#include "depthlab/losses.hpp"
#include "depthlab/model.hpp"

namespace depthlab::engine {

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 3;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double lr = 1e-4;
  SchedulerConfig scheduler;
  uint64_t seed = 42;
  int restarts = 1;
  int seed_stride = 1;   // restart i trains with seed + i*seed_stride
  int max_steps = 0;     // 0 = unbounded; caps total generator steps
  bool keep_all_checkpoints = false;
  adversarial::GanVariant gan;
  losses::LossWeights weights;
  model::GeneratorConfig generator;
  uint64_t config_hash = 0;  // canonical config hash, seed excluded
};

struct EpochRecord {
  int epoch = 0;  // 0 is the pre-training validation pass
  double train_total = 0, train_l1 = 0, train_ssim = 0, train_lr = 0, train_disp = 0;
  double train_g_adv = 0, train_d_loss = 0;
  double val_total = 0, val_l1 = 0;
  double lr = 0;
  int64_t steps = 0;
};

struct RunRecord {
  uint64_t config_hash = 0;
  uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0;
  std::string checkpoint_path;
  int64_t discriminator_steps = 0;
  int64_t generator_steps = 0;
};

struct TrainOptions {
  std::string out_dir;  // empty: keep everything in memory, write nothing
  bool augment = true;
  std::function<void(const std::string&)> step_sink;  // receives each JSONL step record
};

/// Thrown when a loss turns non-finite; carries the diagnostic dump.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Warps each scale's targets with the predicted disparities: recon_right =
/// warp(target_left, d_right, +1), recon_left = warp(target_right, d_left, -1);
/// targets are average-pooled to each scale.
losses::ScaleOutputs build_scale_outputs(const Var& left, const Var& right,
                                         const model::DisparityPyramid& pyramid);

RunRecord train(const TrainConfig& config, const data::Dataset& dataset,
                const TrainOptions& opts = {});

/// Runs config.restarts trainings with seeds seed + i*seed_stride; artifacts
/// land in <out_dir>/restart_<i> when out_dir is set.
std::vector<RunRecord> train_restarts(const TrainConfig& config, const data::Dataset& dataset,
                                      const TrainOptions& opts = {});

struct RestartStat {
  double min = 0, max = 0, mean = 0, stddev = 0;
};

/// Per-metric min/max/mean/sample-std across restarts. Requires >= 2 reports.
std::map<std::string, RestartStat> report_restarts(const std::vector<eval::MetricReport>& reports);

void write_restart_csv(const std::string& path,
                       const std::map<std::string, RestartStat>& stats);

// ---- checkpoints (implementation-defined binary container) ----

void save_checkpoint(const std::string& path, model::Generator& gen, const nn::Adam* opt,
                     int epoch);

struct LoadedCheckpoint {
  std::unique_ptr<model::Generator> generator;
  int epoch = 0;
  uint64_t generator_hash = 0;
};

/// Rebuilds the generator from the stored config and restores parameters,
/// buffers and (optionally) Adam state bit-exactly. Refuses checkpoints whose
/// stored hash does not match their stored config.
LoadedCheckpoint load_checkpoint(const std::string& path, nn::Adam* opt = nullptr);

uint64_t generator_config_hash(const model::GeneratorConfig& cfg);

}  // namespace depthlab::engine
