#include "depthlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "depthlab/enums.hpp"

namespace depthlab::config {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void expect_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) bad(path + "." + it.key(), "unknown key");
}

template <class T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(path + "." + key, "wrong type");
  }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) bad(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json canonical_json(const ExperimentConfig& c);

ExperimentConfig from_json(const json& root) {
  expect_keys(root, "", {"train", "gan", "weights", "generator", "data", "eval"});
  ExperimentConfig cfg;

  if (root.contains("train")) {
    const json& t = root.at("train");
    expect_keys(t, "train",
                {"epochs", "batch_size", "lr", "scheduler", "seed", "restarts", "seed_stride",
                 "max_steps", "keep_all_checkpoints"});
    cfg.train.epochs = get_or(t, "train", "epochs", 50);
    cfg.train.batch_size = get_or(t, "train", "batch_size", 8);
    cfg.train.lr = get_number(t, "train", "lr", 1e-4);
    cfg.train.seed = get_or<uint64_t>(t, "train", "seed", 42);
    cfg.train.restarts = get_or(t, "train", "restarts", 1);
    cfg.train.seed_stride = get_or(t, "train", "seed_stride", 1);
    cfg.train.max_steps = get_or(t, "train", "max_steps", 0);
    cfg.train.keep_all_checkpoints = get_or(t, "train", "keep_all_checkpoints", false);
    if (t.contains("scheduler")) {
      const json& s = t.at("scheduler");
      expect_keys(s, "train.scheduler", {"factor", "patience"});
      cfg.train.scheduler.factor = get_number(s, "train.scheduler", "factor", 0.5);
      cfg.train.scheduler.patience = get_or(s, "train.scheduler", "patience", 3);
    }
    if (cfg.train.epochs < 1) bad("train.epochs", "must be >= 1");
    if (cfg.train.batch_size < 1) bad("train.batch_size", "must be >= 1");
    if (cfg.train.lr <= 0) bad("train.lr", "must be > 0");
    if (cfg.train.restarts < 1) bad("train.restarts", "must be >= 1");
    if (cfg.train.seed_stride < 0) bad("train.seed_stride", "must be >= 0");
    if (cfg.train.scheduler.factor <= 0 || cfg.train.scheduler.factor > 1)
      bad("train.scheduler.factor", "must be in (0,1]");
  }

  if (root.contains("gan")) {
    const json& g = root.at("gan");
    expect_keys(g, "gan", {"kind", "lambda_gp", "n_critic", "wgan_printed_g_sign"});
    try {
      cfg.train.gan.kind = gan_from_string(get_or<std::string>(g, "gan", "kind", "NONE"));
    } catch (const std::invalid_argument& e) {
      bad("gan.kind", e.what());
    }
    cfg.train.gan.lambda_gp = get_number(g, "gan", "lambda_gp", 10.0);
    cfg.train.gan.n_critic = get_or(g, "gan", "n_critic", 1);
    cfg.train.gan.wgan_printed_g_sign = get_or(g, "gan", "wgan_printed_g_sign", false);
    if (cfg.train.gan.n_critic < 1) bad("gan.n_critic", "must be >= 1");
    if (cfg.train.gan.lambda_gp < 0) bad("gan.lambda_gp", "must be >= 0");
  }

  if (root.contains("weights")) {
    const json& w = root.at("weights");
    expect_keys(w, "weights",
                {"gamma_l1", "gamma_ssim", "gamma_lr", "gamma_disp", "phi_g", "components"});
    cfg.train.weights.gamma_l1 = get_number(w, "weights", "gamma_l1", 0.15);
    cfg.train.weights.gamma_ssim = get_number(w, "weights", "gamma_ssim", 0.85);
    cfg.train.weights.gamma_lr = get_number(w, "weights", "gamma_lr", 1.0);
    cfg.train.weights.gamma_disp = get_number(w, "weights", "gamma_disp", 0.1);
    cfg.train.weights.phi_g = get_number(w, "weights", "phi_g", 0.1);
    for (double v : {cfg.train.weights.gamma_l1, cfg.train.weights.gamma_ssim,
                     cfg.train.weights.gamma_lr, cfg.train.weights.gamma_disp,
                     cfg.train.weights.phi_g})
      if (v < 0) bad("weights", "loss weights must be >= 0");
    if (w.contains("components")) {
      if (!w.at("components").is_array()) bad("weights.components", "expected an array");
      cfg.train.weights.use_l1 = cfg.train.weights.use_ssim = cfg.train.weights.use_lr =
          cfg.train.weights.use_disp = false;
      for (const auto& c : w.at("components")) {
        std::string name = c.get<std::string>();
        if (name == "L1")
          cfg.train.weights.use_l1 = true;
        else if (name == "SSIM")
          cfg.train.weights.use_ssim = true;
        else if (name == "LR")
          cfg.train.weights.use_lr = true;
        else if (name == "DISP")
          cfg.train.weights.use_disp = true;
        else
          bad("weights.components", "unknown component '" + name + "'");
      }
    }
  }

  if (root.contains("generator")) {
    const json& g = root.at("generator");
    expect_keys(g, "generator",
                {"backbone", "normalization", "num_output_scales", "width_multiplier"});
    try {
      cfg.train.generator.backbone =
          backbone_from_string(get_or<std::string>(g, "generator", "backbone", "VGG30"));
      cfg.train.generator.normalization =
          norm_from_string(get_or<std::string>(g, "generator", "normalization", "NONE"));
    } catch (const std::invalid_argument& e) {
      bad("generator", e.what());
    }
    cfg.train.generator.num_output_scales = get_or(g, "generator", "num_output_scales", 4);
    cfg.train.generator.width_multiplier = get_number(g, "generator", "width_multiplier", 1.0);
    if (cfg.train.generator.num_output_scales < 1 || cfg.train.generator.num_output_scales > 4)
      bad("generator.num_output_scales", "must be in 1..4");
    if (cfg.train.generator.width_multiplier <= 0 || cfg.train.generator.width_multiplier > 1)
      bad("generator.width_multiplier", "must be in (0,1]");
    if (cfg.train.generator.backbone != model::Backbone::TINY &&
        cfg.train.generator.width_multiplier != 1.0)
      bad("generator.width_multiplier", "only the TINY backbone accepts a width multiplier");
  }

  if (root.contains("data")) {
    const json& d = root.at("data");
    expect_keys(d, "data", {"kind", "root", "height", "width", "augment", "rig", "synthetic"});
    std::string kind = get_or<std::string>(d, "data", "kind", "synthetic");
    if (kind == "synthetic")
      cfg.data.kind = DataConfig::Kind::SYNTHETIC;
    else if (kind == "kitti")
      cfg.data.kind = DataConfig::Kind::KITTI;
    else if (kind == "cityscapes")
      cfg.data.kind = DataConfig::Kind::CITYSCAPES;
    else
      bad("data.kind", "must be synthetic|kitti|cityscapes");
    cfg.data.root = get_or<std::string>(d, "data", "root", "");
    cfg.data.height = get_or<int64_t>(d, "data", "height", 256);
    cfg.data.width = get_or<int64_t>(d, "data", "width", 512);
    cfg.data.augment = get_or(d, "data", "augment", true);
    if (d.contains("rig")) {
      const json& r = d.at("rig");
      expect_keys(r, "data.rig", {"focal_px", "baseline_m", "width_px"});
      cfg.data.rig.focal_px = get_number(r, "data.rig", "focal_px", 0);
      cfg.data.rig.baseline_m = get_number(r, "data.rig", "baseline_m", 0);
      cfg.data.rig.width_px = get_or<int64_t>(r, "data.rig", "width_px", 0);
    }
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      expect_keys(s, "data.synthetic",
                  {"height", "width", "train_scenes", "val_scenes", "test_scenes", "min_layers",
                   "max_layers", "min_disp_px", "max_disp_px", "shade_by_depth", "texture_waves",
                   "view_gain_jitter", "flat_layer_prob", "rig"});
      auto& sp = cfg.data.synthetic;
      sp.height = get_or<int64_t>(s, "data.synthetic", "height", 64);
      sp.width = get_or<int64_t>(s, "data.synthetic", "width", 128);
      cfg.data.synthetic_train = get_or<int64_t>(s, "data.synthetic", "train_scenes", 500);
      cfg.data.synthetic_val = get_or<int64_t>(s, "data.synthetic", "val_scenes", 32);
      cfg.data.synthetic_test = get_or<int64_t>(s, "data.synthetic", "test_scenes", 32);
      sp.min_layers = get_or(s, "data.synthetic", "min_layers", 1);
      sp.max_layers = get_or(s, "data.synthetic", "max_layers", 4);
      sp.min_disp_px = get_or(s, "data.synthetic", "min_disp_px", 2);
      sp.max_disp_px = get_or(s, "data.synthetic", "max_disp_px", 10);
      sp.shade_by_depth = get_or(s, "data.synthetic", "shade_by_depth", true);
      sp.texture_waves = get_or(s, "data.synthetic", "texture_waves", 4);
      sp.view_gain_jitter = get_number(s, "data.synthetic", "view_gain_jitter", 0.0);
      sp.flat_layer_prob = get_number(s, "data.synthetic", "flat_layer_prob", 0.0);
      if (sp.view_gain_jitter < 0 || sp.view_gain_jitter >= 1)
        bad("data.synthetic.view_gain_jitter", "must be in [0,1)");
      if (sp.flat_layer_prob < 0 || sp.flat_layer_prob > 1)
        bad("data.synthetic.flat_layer_prob", "must be in [0,1]");
      if (s.contains("rig")) {
        const json& r = s.at("rig");
        expect_keys(r, "data.synthetic.rig", {"focal_px", "baseline_m", "width_px"});
        sp.rig.focal_px = get_number(r, "data.synthetic.rig", "focal_px", 100.0);
        sp.rig.baseline_m = get_number(r, "data.synthetic.rig", "baseline_m", 0.5);
        sp.rig.width_px = get_or<int64_t>(r, "data.synthetic.rig", "width_px", sp.width);
      } else {
        sp.rig.width_px = sp.width;
      }
    }
  }

  if (root.contains("eval")) {
    const json& e = root.at("eval");
    expect_keys(e, "eval", {"depth_cap", "depth_floor", "crop", "flip_merge"});
    cfg.eval.depth_cap = get_number(e, "eval", "depth_cap", 80.0);
    cfg.eval.depth_floor = get_number(e, "eval", "depth_floor", 1e-3);
    std::string crop = get_or<std::string>(e, "eval", "crop", "none");
    if (crop == "none")
      cfg.eval.crop = eval::EvalProtocol::Crop::NONE;
    else if (crop == "garg")
      cfg.eval.crop = eval::EvalProtocol::Crop::GARG_CENTRE;
    else
      bad("eval.crop", "must be none|garg");
    cfg.eval.use_flip_merge = get_or(e, "eval", "flip_merge", true);
    if (!(cfg.eval.depth_cap > cfg.eval.depth_floor && cfg.eval.depth_floor > 0))
      bad("eval", "requires depth_cap > depth_floor > 0");
  }

  if (!cfg.train.weights.any_component() && cfg.train.gan.kind == adversarial::GanKind::NONE)
    bad("weights.components", "empty component set requires an adversarial objective (GAN-only ablation)");

  // canonical hash over everything except the seed (restart identity)
  json canon = canonical_json(cfg);
  canon.at("train").erase("seed");
  cfg.train.config_hash = fnv1a(canon.dump());
  return cfg;
}

json canonical_json(const ExperimentConfig& c) {
  json w{{"gamma_l1", c.train.weights.gamma_l1},
         {"gamma_ssim", c.train.weights.gamma_ssim},
         {"gamma_lr", c.train.weights.gamma_lr},
         {"gamma_disp", c.train.weights.gamma_disp},
         {"phi_g", c.train.weights.phi_g}};
  json comps = json::array();
  if (c.train.weights.use_l1) comps.push_back("L1");
  if (c.train.weights.use_ssim) comps.push_back("SSIM");
  if (c.train.weights.use_lr) comps.push_back("LR");
  if (c.train.weights.use_disp) comps.push_back("DISP");
  w["components"] = comps;

  std::string kind = c.data.kind == DataConfig::Kind::SYNTHETIC
                         ? "synthetic"
                         : (c.data.kind == DataConfig::Kind::KITTI ? "kitti" : "cityscapes");
  return json{
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"scheduler",
         {{"factor", c.train.scheduler.factor}, {"patience", c.train.scheduler.patience}}},
        {"seed", c.train.seed},
        {"restarts", c.train.restarts},
        {"seed_stride", c.train.seed_stride},
        {"max_steps", c.train.max_steps},
        {"keep_all_checkpoints", c.train.keep_all_checkpoints}}},
      {"gan",
       {{"kind", to_string(c.train.gan.kind)},
        {"lambda_gp", c.train.gan.lambda_gp},
        {"n_critic", c.train.gan.n_critic},
        {"wgan_printed_g_sign", c.train.gan.wgan_printed_g_sign}}},
      {"weights", w},
      {"generator",
       {{"backbone", to_string(c.train.generator.backbone)},
        {"normalization", to_string(c.train.generator.normalization)},
        {"num_output_scales", c.train.generator.num_output_scales},
        {"width_multiplier", c.train.generator.width_multiplier}}},
      {"data",
       {{"kind", kind},
        {"root", c.data.root},
        {"height", c.data.height},
        {"width", c.data.width},
        {"augment", c.data.augment},
        {"rig",
         {{"focal_px", c.data.rig.focal_px},
          {"baseline_m", c.data.rig.baseline_m},
          {"width_px", c.data.rig.width_px}}},
        {"synthetic",
         {{"height", c.data.synthetic.height},
          {"width", c.data.synthetic.width},
          {"train_scenes", c.data.synthetic_train},
          {"val_scenes", c.data.synthetic_val},
          {"test_scenes", c.data.synthetic_test},
          {"min_layers", c.data.synthetic.min_layers},
          {"max_layers", c.data.synthetic.max_layers},
          {"min_disp_px", c.data.synthetic.min_disp_px},
          {"max_disp_px", c.data.synthetic.max_disp_px},
          {"shade_by_depth", c.data.synthetic.shade_by_depth},
          {"texture_waves", c.data.synthetic.texture_waves},
          {"rig",
           {{"focal_px", c.data.synthetic.rig.focal_px},
            {"baseline_m", c.data.synthetic.rig.baseline_m},
            {"width_px", c.data.synthetic.rig.width_px}}}}}}},
      {"eval",
       {{"depth_cap", c.eval.depth_cap},
        {"depth_floor", c.eval.depth_floor},
        {"crop", c.eval.crop == eval::EvalProtocol::Crop::GARG_CENTRE ? "garg" : "none"},
        {"flip_merge", c.eval.use_flip_merge}}}};
}

void apply_override(json& root, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + spec + "' is not of the form key.path=value");
  std::string path = spec.substr(0, eq);
  std::string value = spec.substr(eq + 1);

  json* node = &root;
  size_t at = 0;
  while (true) {
    size_t dot = path.find('.', at);
    std::string key = path.substr(at, dot == std::string::npos ? dot : dot - at);
    if (key.empty()) throw ConfigError("override '" + spec + "' has an empty path segment");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    at = dot + 1;
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(root, o);
  return from_json(root);
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

std::string dump_config(const ExperimentConfig& cfg) { return canonical_json(cfg).dump(2); }

geometry::CameraRig resolve_rig(const DataConfig& cfg) {
  if (cfg.rig.valid()) return cfg.rig;
  switch (cfg.kind) {
    case DataConfig::Kind::SYNTHETIC: return cfg.synthetic.rig;
    case DataConfig::Kind::KITTI: return {721.5377, 0.54, 1242};
    case DataConfig::Kind::CITYSCAPES: return {2262.52, 0.209313, 2048};
  }
  throw std::logic_error("resolve_rig: bad kind");
}

std::unique_ptr<data::Dataset> make_dataset(const DataConfig& cfg) {
  switch (cfg.kind) {
    case DataConfig::Kind::SYNTHETIC:
      return std::make_unique<data::SyntheticDataset>(cfg.synthetic, /*seed=*/1234567,
                                                      cfg.synthetic_train, cfg.synthetic_val,
                                                      cfg.synthetic_test);
    case DataConfig::Kind::KITTI:
      return std::make_unique<data::FolderDataset>(cfg.root, data::FolderConvention::KITTI,
                                                   resolve_rig(cfg), cfg.height, cfg.width);
    case DataConfig::Kind::CITYSCAPES:
      return std::make_unique<data::FolderDataset>(cfg.root, data::FolderConvention::CITYSCAPES,
                                                   resolve_rig(cfg), cfg.height, cfg.width);
  }
  throw std::logic_error("make_dataset: bad kind");
}

}  // namespace depthlab::config
