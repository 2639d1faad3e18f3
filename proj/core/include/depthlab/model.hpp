#pragma once

#include <memory>

#include "depthlab/geometry.hpp"
#include "depthlab/nn.hpp"

namespace depthlab::model {

enum class Backbone { VGG30, RESNET18, RESNET50, TINY };

struct GeneratorConfig {
  Backbone backbone = Backbone::VGG30;
  nn::NormKind normalization = nn::NormKind::NONE;
  int num_output_scales = 4;
  double width_multiplier = 1.0;  // TINY only
};

/// Per-scale left/right disparity maps [N,H_s,W_s], finest scale first, every
/// value in [0, kMaxDisparity].
struct DisparityPyramid {
  std::vector<Var> left, right;

  int64_t scales() const { return static_cast<int64_t>(left.size()); }
};

/// Encoder-decoder disparity generator with skip connections. The decoder
/// emits a 2-channel sigmoid head (left+right disparity, scaled by 0.3) at
/// each of the finest num_output_scales scales; coarser predictions feed the
/// next finer decoder stage.
class Generator : public nn::ModuleBase {
 public:
  Generator(const GeneratorConfig& cfg, uint64_t seed);

  /// left_image [N,3,H,W] (or [3,H,W]); H and W must be divisible by
  /// 2^encoder_depth().
  DisparityPyramid forward(const Var& left_image, bool training);

  int encoder_depth() const { return depth_; }
  const GeneratorConfig& config() const { return cfg_; }

  /// Sum of channels across all normalization sites (affine-parameter
  /// arithmetic for the normalization ablation).
  int64_t norm_site_channels() const { return norm_site_channels_; }

 private:
  struct ConvBlock {
    nn::Conv2d conv;
    nn::Norm2d norm;
  };
  struct ResBlock {
    ConvBlock c1, c2, c3;  // c3 used by bottlenecks only
    bool bottleneck = false;
    nn::Conv2d shortcut;
    nn::Norm2d shortcut_norm;
    bool has_shortcut = false;
  };

  ConvBlock make_block(const std::string& name, int64_t in_c, int64_t out_c, int64_t k, int stride,
                       Rng& rng);
  ResBlock make_basic(const std::string& name, int64_t in_c, int64_t out_c, int stride, Rng& rng);
  ResBlock make_bottleneck(const std::string& name, int64_t in_c, int64_t mid_c, int stride,
                           Rng& rng);
  Var run_block(ConvBlock& b, const Var& x, bool training, bool use_elu);
  Var run_conv_norm(ConvBlock& b, const Var& x, bool training);
  Var run_res(ResBlock& b, const Var& x, bool training);
  std::vector<Var> encode(const Var& x, bool training);

  GeneratorConfig cfg_;
  int depth_ = 0;
  // VGG/TINY encoder: two conv blocks per stage
  std::vector<ConvBlock> enc_a_, enc_b_;
  // ResNet encoder
  ConvBlock stem_;
  std::vector<std::vector<ResBlock>> res_layers_;
  // decoder, index 0 holds stage 1 (finest)
  std::vector<ConvBlock> upconv_, iconv_;
  std::vector<nn::Conv2d> heads_;
  bool use_elu_encoder_ = true;
  int64_t norm_site_channels_ = 0;
};

std::unique_ptr<Generator> build_generator(const GeneratorConfig& cfg, uint64_t seed);

}  // namespace depthlab::model
