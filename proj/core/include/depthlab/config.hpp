#pragma once

#include <memory>
#include <string>
#include <vector>

#include "depthlab/data.hpp"
#include "depthlab/engine.hpp"
#include "depthlab/eval.hpp"

namespace depthlab::config {

struct DataConfig {
  enum class Kind { SYNTHETIC, KITTI, CITYSCAPES } kind = Kind::SYNTHETIC;
  std::string root;  // folder datasets
  int64_t height = 256, width = 512;
  bool augment = true;
  geometry::CameraRig rig{0, 0, 0};  // zeros: use the per-kind default
  data::SyntheticSpec synthetic;
  int64_t synthetic_train = 500, synthetic_val = 32, synthetic_test = 32;
};

struct ExperimentConfig {
  engine::TrainConfig train;  // carries gan, weights, generator and the hash
  DataConfig data;
  eval::EvalProtocol eval;
};

/// Thrown on schema violations; the message names the offending key path.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Parses, applies `--set key.path=value` overrides, validates against the
/// full schema (unknown keys rejected), fills documented defaults and stamps
/// train.config_hash (canonical form, seed excluded).
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {});

/// Canonical JSON text of a config (the form that is hashed and echoed).
std::string dump_config(const ExperimentConfig& cfg);

std::unique_ptr<data::Dataset> make_dataset(const DataConfig& cfg);

/// Camera rig resolved for the dataset kind (config override or default).
geometry::CameraRig resolve_rig(const DataConfig& cfg);

}  // namespace depthlab::config
