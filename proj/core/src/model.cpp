#include "depthlab/model.hpp"

#include <cmath>

namespace depthlab::model {

namespace {
using namespace ops;

int64_t scaled(int64_t base, double mult) {
  return std::max<int64_t>(4, static_cast<int64_t>(std::llround(base * mult)));
}
}  // namespace

Generator::ConvBlock Generator::make_block(const std::string& name, int64_t in_c, int64_t out_c,
                                           int64_t k, int stride, Rng& rng) {
  ConvBlock b;
  b.conv = nn::Conv2d(*this, name, in_c, out_c, k, stride, static_cast<int>(k / 2), rng);
  b.norm = nn::Norm2d(*this, name + ".norm", cfg_.normalization, out_c);
  if (cfg_.normalization != nn::NormKind::NONE) norm_site_channels_ += out_c;
  return b;
}

Generator::ResBlock Generator::make_basic(const std::string& name, int64_t in_c, int64_t out_c,
                                          int stride, Rng& rng) {
  ResBlock b;
  b.c1 = make_block(name + ".c1", in_c, out_c, 3, stride, rng);
  b.c2 = make_block(name + ".c2", out_c, out_c, 3, 1, rng);
  b.has_shortcut = stride != 1 || in_c != out_c;
  if (b.has_shortcut) {
    b.shortcut = nn::Conv2d(*this, name + ".sc", in_c, out_c, 1, stride, 0, rng);
    b.shortcut_norm = nn::Norm2d(*this, name + ".sc.norm", cfg_.normalization, out_c);
    if (cfg_.normalization != nn::NormKind::NONE) norm_site_channels_ += out_c;
  }
  return b;
}

Generator::ResBlock Generator::make_bottleneck(const std::string& name, int64_t in_c,
                                               int64_t mid_c, int stride, Rng& rng) {
  ResBlock b;
  b.bottleneck = true;
  int64_t out_c = 4 * mid_c;
  b.c1 = make_block(name + ".c1", in_c, mid_c, 1, 1, rng);
  b.c2 = make_block(name + ".c2", mid_c, mid_c, 3, stride, rng);
  b.c3 = make_block(name + ".c3", mid_c, out_c, 1, 1, rng);
  b.has_shortcut = stride != 1 || in_c != out_c;
  if (b.has_shortcut) {
    b.shortcut = nn::Conv2d(*this, name + ".sc", in_c, out_c, 1, stride, 0, rng);
    b.shortcut_norm = nn::Norm2d(*this, name + ".sc.norm", cfg_.normalization, out_c);
    if (cfg_.normalization != nn::NormKind::NONE) norm_site_channels_ += out_c;
  }
  return b;
}

Var Generator::run_conv_norm(ConvBlock& b, const Var& x, bool training) {
  Var y = b.conv.forward(x);
  if (b.norm.kind != nn::NormKind::NONE) y = b.norm.forward(y, training);
  return y;
}

Var Generator::run_block(ConvBlock& b, const Var& x, bool training, bool act_elu) {
  Var y = run_conv_norm(b, x, training);
  return act_elu ? elu(y) : relu(y);
}

Var Generator::run_res(ResBlock& b, const Var& x, bool training) {
  // final conv of the block has no activation before the residual add
  Var y = run_block(b.c1, x, training, /*act_elu=*/false);
  if (b.bottleneck) y = run_block(b.c2, y, training, false);
  Var main = run_conv_norm(b.bottleneck ? b.c3 : b.c2, y, training);
  Var sc = x;
  if (b.has_shortcut) {
    sc = b.shortcut.forward(x);
    if (b.shortcut_norm.kind != nn::NormKind::NONE) sc = b.shortcut_norm.forward(sc, training);
  }
  return relu(main + sc);
}

Generator::Generator(const GeneratorConfig& cfg, uint64_t seed) : cfg_(cfg) {
  check(cfg.num_output_scales >= 1 && cfg.num_output_scales <= 4,
        "GeneratorConfig: num_output_scales must be in 1..4");
  check(cfg.width_multiplier > 0 && cfg.width_multiplier <= 1.0,
        "GeneratorConfig: width_multiplier must be in (0,1]");
  check(cfg.backbone == Backbone::TINY || cfg.width_multiplier == 1.0,
        "GeneratorConfig: width_multiplier applies to the TINY backbone only");

  Rng rng(seed);
  int s_count = cfg.num_output_scales;
  std::vector<int64_t> enc_out;  // skip channels, index by stage-1
  std::vector<int64_t> dec_ch;   // decoder widths, index by stage-1

  switch (cfg.backbone) {
    case Backbone::VGG30:
    case Backbone::TINY: {
      bool tiny = cfg.backbone == Backbone::TINY;
      double mult = tiny ? cfg.width_multiplier : 1.0;
      std::vector<int64_t> ch, ks;
      if (tiny) {
        for (int64_t c : {32, 64, 128, 256, 512}) ch.push_back(scaled(c, mult));
        ks = {3, 3, 3, 3, 3};
        for (int64_t c : {16, 32, 64, 128, 256}) dec_ch.push_back(scaled(c, mult));
      } else {
        ch = {32, 64, 128, 256, 512, 512, 512};
        ks = {7, 5, 3, 3, 3, 3, 3};
        dec_ch = {16, 32, 64, 128, 256, 512, 512};
      }
      depth_ = static_cast<int>(ch.size());
      int64_t in_c = 3;
      for (int i = 0; i < depth_; ++i) {
        std::string base = "enc" + std::to_string(i + 1);
        enc_a_.push_back(make_block(base + "a", in_c, ch[i], ks[i], 1, rng));
        enc_b_.push_back(make_block(base + "b", ch[i], ch[i], ks[i], 2, rng));
        in_c = ch[i];
        enc_out.push_back(ch[i]);
      }
      use_elu_encoder_ = true;
      break;
    }
    case Backbone::RESNET18:
    case Backbone::RESNET50: {
      bool deep = cfg.backbone == Backbone::RESNET50;
      depth_ = 5;
      dec_ch = {16, 32, 64, 128, 256};
      stem_ = make_block("stem", 3, 64, 7, 2, rng);
      enc_out.push_back(64);
      std::vector<int> blocks = deep ? std::vector<int>{3, 4, 6, 3} : std::vector<int>{2, 2, 2, 2};
      std::vector<int64_t> width = {64, 128, 256, 512};
      int64_t in_c = 64;
      for (int li = 0; li < 4; ++li) {
        std::vector<ResBlock> layer;
        for (int bi = 0; bi < blocks[li]; ++bi) {
          std::string name = "l" + std::to_string(li + 1) + "b" + std::to_string(bi);
          int stride = (bi == 0 && li > 0) ? 2 : 1;
          if (deep) {
            layer.push_back(make_bottleneck(name, in_c, width[li], stride, rng));
            in_c = 4 * width[li];
          } else {
            layer.push_back(make_basic(name, in_c, width[li], stride, rng));
            in_c = width[li];
          }
        }
        res_layers_.push_back(std::move(layer));
        enc_out.push_back(in_c);
      }
      use_elu_encoder_ = false;
      break;
    }
  }

  // Decoder, coarsest stage first during construction; stored finest-first.
  upconv_.resize(static_cast<size_t>(depth_));
  iconv_.resize(static_cast<size_t>(depth_));
  heads_.resize(static_cast<size_t>(std::min(s_count, depth_)));
  for (int i = depth_; i >= 1; --i) {
    std::string base = "dec" + std::to_string(i);
    int64_t up_in = (i == depth_) ? enc_out[static_cast<size_t>(depth_ - 1)]
                                  : dec_ch[static_cast<size_t>(i)];
    int64_t up_out = dec_ch[static_cast<size_t>(i - 1)];
    upconv_[static_cast<size_t>(i - 1)] = make_block(base + ".up", up_in, up_out, 3, 1, rng);
    int64_t cat_c = up_out;
    if (i >= 2) cat_c += enc_out[static_cast<size_t>(i - 2)];
    if (i + 1 <= s_count) cat_c += 2;
    iconv_[static_cast<size_t>(i - 1)] = make_block(base + ".i", cat_c, up_out, 3, 1, rng);
    if (i <= s_count)
      heads_[static_cast<size_t>(i - 1)] =
          nn::Conv2d(*this, "head" + std::to_string(i), up_out, 2, 3, 1, 1, rng);
  }
}

std::vector<Var> Generator::encode(const Var& x, bool training) {
  std::vector<Var> feats;
  if (cfg_.backbone == Backbone::VGG30 || cfg_.backbone == Backbone::TINY) {
    Var h = x;
    for (size_t i = 0; i < enc_a_.size(); ++i) {
      h = run_block(enc_a_[i], h, training, use_elu_encoder_);
      h = run_block(enc_b_[i], h, training, use_elu_encoder_);
      feats.push_back(h);
    }
  } else {
    Var h = run_block(stem_, x, training, /*act_elu=*/false);
    feats.push_back(h);
    h = maxpool2d_3x3s2(h);
    for (auto& layer : res_layers_) {
      for (auto& block : layer) h = run_res(block, h, training);
      feats.push_back(h);
    }
  }
  return feats;
}

DisparityPyramid Generator::forward(const Var& left_image, bool training) {
  Var x = left_image;
  if (x.val().rank() == 3) {
    auto s = x.shape();
    x = reshape(x, {1, s[0], s[1], s[2]});
  }
  check(x.val().rank() == 4 && x.val().dim(1) == 3, "Generator: expects [N,3,H,W]");
  int64_t h = x.val().dim(2), w = x.val().dim(3);
  int64_t div = int64_t{1} << depth_;
  check(h % div == 0 && w % div == 0,
        "Generator: input " + std::to_string(h) + "x" + std::to_string(w) +
            " not divisible by 2^" + std::to_string(depth_));

  auto feats = encode(x, training);
  int s_count = cfg_.num_output_scales;
  std::vector<Var> disp_raw(static_cast<size_t>(s_count));  // [N,2,h,w] per head stage
  Var cur = feats.back();
  for (int i = depth_; i >= 1; --i) {
    cur = run_block(upconv_[static_cast<size_t>(i - 1)], upsample_nearest2(cur), training, true);
    std::vector<Var> cat{cur};
    if (i >= 2) cat.push_back(feats[static_cast<size_t>(i - 2)]);
    if (i + 1 <= s_count) cat.push_back(upsample_nearest2(disp_raw[static_cast<size_t>(i)]));
    Var joined = cat.size() > 1 ? concat_channels(cat) : cat[0];
    cur = run_block(iconv_[static_cast<size_t>(i - 1)], joined, training, true);
    if (i <= s_count)
      disp_raw[static_cast<size_t>(i - 1)] =
          scale(sigmoid(heads_[static_cast<size_t>(i - 1)].forward(cur)), geometry::kMaxDisparity);
  }

  DisparityPyramid pyr;
  for (int s = 0; s < s_count; ++s) {
    const Var& d = disp_raw[static_cast<size_t>(s)];
    auto ds = d.shape();  // [N,2,h,w]
    pyr.left.push_back(reshape(slice_channels(d, 0, 1), {ds[0], ds[2], ds[3]}));
    pyr.right.push_back(reshape(slice_channels(d, 1, 2), {ds[0], ds[2], ds[3]}));
  }
  return pyr;
}

std::unique_ptr<Generator> build_generator(const GeneratorConfig& cfg, uint64_t seed) {
  return std::make_unique<Generator>(cfg, seed);
}

}  // namespace depthlab::model
