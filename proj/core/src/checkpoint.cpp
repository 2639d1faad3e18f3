#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "depthlab/engine.hpp"
#include "depthlab/enums.hpp"

namespace depthlab {

std::string to_string(model::Backbone b) {
  switch (b) {
    case model::Backbone::VGG30: return "VGG30";
    case model::Backbone::RESNET18: return "RESNET18";
    case model::Backbone::RESNET50: return "RESNET50";
    case model::Backbone::TINY: return "TINY";
  }
  return "?";
}

std::string to_string(nn::NormKind k) {
  switch (k) {
    case nn::NormKind::NONE: return "NONE";
    case nn::NormKind::BATCH: return "BATCH";
    case nn::NormKind::INSTANCE: return "INSTANCE";
  }
  return "?";
}

std::string to_string(adversarial::GanKind k) {
  switch (k) {
    case adversarial::GanKind::NONE: return "NONE";
    case adversarial::GanKind::VANILLA: return "VANILLA";
    case adversarial::GanKind::LSGAN: return "LSGAN";
    case adversarial::GanKind::WGAN_GP: return "WGAN_GP";
  }
  return "?";
}

model::Backbone backbone_from_string(const std::string& s) {
  if (s == "VGG30") return model::Backbone::VGG30;
  if (s == "RESNET18") return model::Backbone::RESNET18;
  if (s == "RESNET50") return model::Backbone::RESNET50;
  if (s == "TINY") return model::Backbone::TINY;
  throw std::invalid_argument("unknown backbone: " + s);
}

nn::NormKind norm_from_string(const std::string& s) {
  if (s == "NONE") return nn::NormKind::NONE;
  if (s == "BATCH") return nn::NormKind::BATCH;
  if (s == "INSTANCE") return nn::NormKind::INSTANCE;
  throw std::invalid_argument("unknown normalization: " + s);
}

adversarial::GanKind gan_from_string(const std::string& s) {
  if (s == "NONE") return adversarial::GanKind::NONE;
  if (s == "VANILLA") return adversarial::GanKind::VANILLA;
  if (s == "LSGAN") return adversarial::GanKind::LSGAN;
  if (s == "WGAN_GP") return adversarial::GanKind::WGAN_GP;
  throw std::invalid_argument("unknown GAN kind: " + s);
}

}  // namespace depthlab

namespace depthlab::engine {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'D', 'L', 'A', 'B', 'C', 'K', 'P', '1'};

json generator_config_json(const model::GeneratorConfig& cfg) {
  return json{{"backbone", to_string(cfg.backbone)},
              {"normalization", to_string(cfg.normalization)},
              {"num_output_scales", cfg.num_output_scales},
              {"width_multiplier", cfg.width_multiplier}};
}

model::GeneratorConfig generator_config_from_json(const json& j) {
  model::GeneratorConfig cfg;
  cfg.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  cfg.normalization = norm_from_string(j.at("normalization").get<std::string>());
  cfg.num_output_scales = j.at("num_output_scales").get<int>();
  cfg.width_multiplier = j.at("width_multiplier").get<double>();
  return cfg;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_doubles(std::ofstream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, Tensor& t) {
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

uint64_t generator_config_hash(const model::GeneratorConfig& cfg) {
  return fnv1a(generator_config_json(cfg).dump());
}

void save_checkpoint(const std::string& path, model::Generator& gen, const nn::Adam* opt,
                     int epoch) {
  json header;
  header["generator"] = generator_config_json(gen.config());
  header["generator_hash"] = generator_config_hash(gen.config());
  header["epoch"] = epoch;
  json params = json::array();
  for (const auto& p : gen.params())
    params.push_back({{"name", p.name}, {"shape", p.var.shape()}});
  header["params"] = params;
  json buffers = json::array();
  for (const auto& b : gen.buffers())
    buffers.push_back({{"name", b.name}, {"shape", b.tensor->shape()}});
  header["buffers"] = buffers;
  header["adam_step"] = opt ? opt->step_count() : -1;

  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), "checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::string htext = header.dump();
  uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));

  for (const auto& p : gen.params()) write_doubles(out, p.var.val());
  for (const auto& b : gen.buffers()) write_doubles(out, *b.tensor);
  if (opt) {
    for (const auto& slot : const_cast<nn::Adam*>(opt)->slots()) {
      write_doubles(out, slot.m);
      write_doubles(out, slot.v);
    }
  }
  check(static_cast<bool>(out), "checkpoint: write failure on " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, nn::Adam* opt) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), "checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  check(in && std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  check(version == 1, "checkpoint: unsupported version");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  json header = json::parse(htext);

  model::GeneratorConfig cfg = generator_config_from_json(header.at("generator"));
  uint64_t stored_hash = header.at("generator_hash").get<uint64_t>();
  if (stored_hash != generator_config_hash(cfg))
    throw std::runtime_error(
        "checkpoint: config hash mismatch — stored architecture does not match its hash (" +
        path + ")");

  LoadedCheckpoint out;
  out.generator = std::make_unique<model::Generator>(cfg, /*seed=*/0);
  out.epoch = header.at("epoch").get<int>();
  out.generator_hash = stored_hash;

  const json& params = header.at("params");
  check(params.size() == out.generator->params().size(),
        "checkpoint: parameter list mismatch in " + path);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = out.generator->params()[i];
    check(params[i].at("name").get<std::string>() == p.name,
          "checkpoint: parameter name mismatch at index " + std::to_string(i));
    read_doubles(in, p.var.mutable_val());
  }
  const json& buffers = header.at("buffers");
  check(buffers.size() == out.generator->buffers().size(),
        "checkpoint: buffer list mismatch in " + path);
  for (size_t i = 0; i < buffers.size(); ++i) read_doubles(in, *out.generator->buffers()[i].tensor);

  int64_t adam_step = header.at("adam_step").get<int64_t>();
  if (opt && adam_step >= 0) {
    *opt = nn::Adam(out.generator->params(), opt->lr());
    for (auto& slot : opt->slots()) {
      read_doubles(in, slot.m);
      read_doubles(in, slot.v);
    }
    opt->set_step_count(adam_step);
  }
  check(static_cast<bool>(in), "checkpoint: truncated file " + path);
  return out;
}

}  // namespace depthlab::engine
