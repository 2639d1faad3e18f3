#include "depthlab/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "depthlab/image_io.hpp"

namespace depthlab::data {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::TRAIN: return "train";
    case Split::VAL: return "val";
    case Split::TEST: return "test";
  }
  return "?";
}

namespace {
std::vector<std::string> read_id_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line.find_first_of(" \t") != std::string::npos)
      throw std::runtime_error("manifest: malformed id at " + path + ":" +
                               std::to_string(line_no) + " ('" + line + "')");
    ids.push_back(line);
  }
  return ids;
}
}  // namespace

SplitManifest SplitManifest::load(const std::string& dataset_root) {
  SplitManifest m;
  m.train = read_id_list(dataset_root + "/splits/train.txt");
  m.val = read_id_list(dataset_root + "/splits/val.txt");
  m.test = read_id_list(dataset_root + "/splits/test.txt");
  return m;
}

const std::vector<std::string>& SplitManifest::ids(Split s) const {
  switch (s) {
    case Split::TRAIN: return train;
    case Split::VAL: return val;
    case Split::TEST: return test;
  }
  throw std::logic_error("bad split");
}

FolderDataset::FolderDataset(std::string root, FolderConvention convention,
                             geometry::CameraRig rig, int64_t target_h, int64_t target_w)
    : root_(std::move(root)),
      convention_(convention),
      rig_(rig),
      target_h_(target_h),
      target_w_(target_w),
      manifest_(SplitManifest::load(root_)) {}

int64_t FolderDataset::size(Split split) const {
  return static_cast<int64_t>(manifest_.ids(split).size());
}

std::string FolderDataset::id(Split split, int64_t index) const {
  return manifest_.ids(split).at(static_cast<size_t>(index));
}

std::array<int64_t, 4> FolderDataset::cityscapes_crop(int64_t h, int64_t w) {
  // top 50 and bottom 224 rows of a 1024-row frame, proportionally otherwise
  int64_t top = (50 * h) / 1024;
  int64_t bottom = h - (224 * h) / 1024;
  int64_t kept_h = bottom - top;
  int64_t want_w = 2 * kept_h;
  int64_t side = std::max<int64_t>(0, (w - want_w) / 2);
  return {top, bottom, side, w - side};
}

StereoSample FolderDataset::get(Split split, int64_t index, bool with_gt) const {
  StereoSample s;
  s.id = id(split, index);
  s.rig = rig_;
  std::string left_path = root_ + "/images/" + s.id + "_L.png";
  std::string right_path = root_ + "/images/" + s.id + "_R.png";
  for (const auto& p : {left_path, right_path})
    if (!fs::exists(p))
      throw std::runtime_error("dataset: missing file for sample '" + s.id + "': " + p);

  Tensor left = io::read_image_png(left_path);
  Tensor right = io::read_image_png(right_path);
  check(left.same_shape(right), "dataset: left/right size mismatch for sample " + s.id);
  if (left.dim(0) == 1) {  // promote grayscale
    Tensor rgb({3, left.dim(1), left.dim(2)});
    for (int64_t c = 0; c < 3; ++c)
      std::copy(left.data(), left.data() + left.size(), rgb.data() + c * left.size());
    left = rgb;
    Tensor rgb2({3, right.dim(1), right.dim(2)});
    for (int64_t c = 0; c < 3; ++c)
      std::copy(right.data(), right.data() + right.size(), rgb2.data() + c * right.size());
    right = rgb2;
  }

  if (convention_ == FolderConvention::CITYSCAPES) {
    auto [top, bottom, l, r] = cityscapes_crop(left.dim(1), left.dim(2));
    auto crop = [&](const Tensor& img) {
      Tensor out({img.dim(0), bottom - top, r - l});
      for (int64_t c = 0; c < img.dim(0); ++c)
        for (int64_t i = top; i < bottom; ++i)
          for (int64_t j = l; j < r; ++j) out.at(c, i - top, j - l) = img.at(c, i, j);
      return out;
    };
    left = crop(left);
    right = crop(right);
  }

  s.left = io::resize_bilinear(left, target_h_, target_w_);
  s.right = io::resize_bilinear(right, target_h_, target_w_);

  if (with_gt) {
    std::string depth_path = root_ + "/depth/" + s.id + ".png";
    if (fs::exists(depth_path)) {
      s.gt_depth = io::read_depth_png16(depth_path);
      if (convention_ == FolderConvention::CITYSCAPES) {
        // keep gt aligned with the cropped left view
        auto [top, bottom, l, r] = cityscapes_crop(s.gt_depth.dim(0), s.gt_depth.dim(1));
        Tensor out({bottom - top, r - l});
        for (int64_t i = top; i < bottom; ++i)
          for (int64_t j = l; j < r; ++j) out.at(i - top, j - l) = s.gt_depth.at(i, j);
        s.gt_depth = std::move(out);
      }
    }
  }
  return s;
}

// ---- augmentation ----

AugmentParams sample_augment_params(uint64_t seed) {
  Rng rng(seed);
  AugmentParams p;
  p.do_gamma = rng.coin();
  if (p.do_gamma) p.gamma = rng.uniform(0.8, 1.2);
  p.do_brightness = rng.coin();
  if (p.do_brightness) p.brightness = rng.uniform(0.5, 2.0);
  p.do_color = rng.coin();
  if (p.do_color)
    for (double& c : p.color) c = rng.uniform(0.8, 1.2);
  p.do_flip = rng.coin();
  return p;
}

namespace {
Tensor flip_image(const Tensor& img) {
  Tensor out(img.shape());
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(ch, i, j) = img.at(ch, i, w - 1 - j);
  return out;
}
}  // namespace

StereoSample apply_augment(const StereoSample& sample, const AugmentParams& p) {
  StereoSample out = sample;
  bool photometric = p.do_gamma || p.do_brightness || p.do_color;
  if (photometric) {
    auto transform = [&](Tensor& img) {
      int64_t c = img.dim(0), hw = img.dim(1) * img.dim(2);
      for (int64_t ch = 0; ch < c; ++ch) {
        double* ptr = img.data() + ch * hw;
        double color = p.do_color ? p.color[ch] : 1.0;
        for (int64_t k = 0; k < hw; ++k) {
          double v = ptr[k];
          if (p.do_gamma) v = std::pow(v, p.gamma);
          if (p.do_brightness) v *= p.brightness;
          v *= color;
          ptr[k] = std::min(1.0, std::max(0.0, v));
        }
      }
    };
    transform(out.left);
    transform(out.right);
  }
  if (p.do_flip) {
    // mirrored views swap roles so their relative geometry is preserved
    Tensor new_left = flip_image(out.right);
    Tensor new_right = flip_image(out.left);
    out.left = std::move(new_left);
    out.right = std::move(new_right);
  }
  return out;
}

// ---- synthetic scenes ----

namespace {

struct WaveTexture {
  // low-frequency sinusoid mixture per channel, defined on extended columns
  std::array<double, 3> base;
  struct Wave {
    double fi, fu, phase, amp;
    std::array<double, 3> mix;
  };
  std::vector<Wave> waves;
  double shade = 1.0;

  double value(int64_t ch, int64_t i, int64_t u) const {
    double v = base[static_cast<size_t>(ch)];
    for (const auto& w : waves)
      v += w.amp * w.mix[static_cast<size_t>(ch)] *
           std::sin(w.fi * static_cast<double>(i) + w.fu * static_cast<double>(u) + w.phase);
    return std::min(1.0, std::max(0.0, v * shade));
  }
};

WaveTexture make_texture(Rng& rng, int waves, double shade) {
  WaveTexture t;
  for (auto& b : t.base) b = rng.uniform(0.35, 0.75);
  t.shade = shade;
  for (int k = 0; k < waves; ++k) {
    WaveTexture::Wave w;
    double wavelength = rng.uniform(6.0, 40.0);
    double angle = rng.uniform(0.0, 6.283185307179586);
    w.fi = 2.0 * 3.141592653589793 / wavelength * std::sin(angle);
    w.fu = 2.0 * 3.141592653589793 / wavelength * std::cos(angle);
    w.phase = rng.uniform(0.0, 6.283185307179586);
    w.amp = rng.uniform(0.08, 0.22);
    for (auto& m : w.mix) m = rng.uniform(0.5, 1.0);
    t.waves.push_back(w);
  }
  return t;
}

struct Layer {
  int64_t r0, r1, c0, c1;  // extent in left-view coordinates; columns may exceed view
  int64_t disp_px;
  WaveTexture tex;
};

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec, uint64_t seed) {
  check(spec.height >= 8 && spec.width >= 16, "synthetic: image too small");
  check(spec.min_disp_px >= 1 && spec.max_disp_px >= spec.min_disp_px,
        "synthetic: bad disparity range");
  check(static_cast<double>(spec.max_disp_px) / static_cast<double>(spec.width) <=
            geometry::kMaxDisparity,
        "synthetic: spec yields disparity above the generator ceiling");
  check(spec.min_layers >= 0 && spec.max_layers >= spec.min_layers, "synthetic: bad layer range");

  Rng rng(seed);
  int64_t h = spec.height, w = spec.width;
  double num = spec.rig.focal_px * spec.rig.baseline_m;

  auto shade_of = [&](int64_t p) {
    if (!spec.shade_by_depth) return 1.0;
    double t = spec.max_disp_px == spec.min_disp_px
                   ? 1.0
                   : static_cast<double>(p - spec.min_disp_px) /
                         static_cast<double>(spec.max_disp_px - spec.min_disp_px);
    return 0.4 + 0.6 * t;  // nearer (larger disparity) is brighter
  };

  std::vector<Layer> layers;
  // background plane spans all columns both views sample
  Layer bg;
  bg.r0 = 0;
  bg.r1 = h;
  bg.c0 = -spec.max_disp_px - 1;
  bg.c1 = w + spec.max_disp_px + 1;
  bg.disp_px = spec.min_disp_px;
  bg.tex = make_texture(rng, spec.texture_waves, shade_of(bg.disp_px));
  layers.push_back(bg);

  int k = spec.min_layers +
          static_cast<int>(rng.uniform_int(spec.max_layers - spec.min_layers + 1));
  std::vector<int64_t> disps;
  for (int i = 0; i < k; ++i)
    disps.push_back(spec.min_disp_px +
                    rng.uniform_int(spec.max_disp_px - spec.min_disp_px + 1));
  std::sort(disps.begin(), disps.end());  // paint far-to-near
  for (int64_t p : disps) {
    Layer l;
    int64_t lw = h / 4 + rng.uniform_int(std::max<int64_t>(1, w / 2 - h / 4));
    int64_t lh = h / 4 + rng.uniform_int(std::max<int64_t>(1, h / 2 - h / 4));
    l.c0 = -p + rng.uniform_int(w + p - lw + 1);  // may start left of the view
    l.c1 = l.c0 + lw;
    l.r0 = rng.uniform_int(h - lh + 1);
    l.r1 = l.r0 + lh;
    l.disp_px = p;
    l.tex = make_texture(rng, spec.texture_waves, shade_of(p));
    if (rng.uniform() < spec.flat_layer_prob)
      for (auto& wave : l.tex.waves) wave.amp *= 0.04;  // near-flat: plain L1 is underdetermined
    layers.push_back(l);
  }

  SyntheticScene scene;
  scene.sample.id = "synth_" + std::to_string(seed);
  scene.sample.rig = spec.rig;
  scene.sample.left = Tensor({3, h, w});
  scene.sample.right = Tensor({3, h, w});
  scene.left_disp = Tensor({h, w});
  scene.right_disp = Tensor({h, w});
  scene.sample.gt_depth = Tensor({h, w});

  for (const Layer& l : layers) {
    double d_frac = static_cast<double>(l.disp_px) / static_cast<double>(w);
    // left view: texture sampled at u = column
    for (int64_t i = std::max<int64_t>(0, l.r0); i < std::min(h, l.r1); ++i)
      for (int64_t j = std::max<int64_t>(0, l.c0); j < std::min(w, l.c1); ++j) {
        for (int64_t c = 0; c < 3; ++c)
          scene.sample.left.at(c, i, j) = l.tex.value(c, i, j);
        scene.left_disp.at(i, j) = d_frac;
      }
    // right view: column j shows the layer point at u = j + p
    for (int64_t i = std::max<int64_t>(0, l.r0); i < std::min(h, l.r1); ++i)
      for (int64_t j = std::max<int64_t>(0, l.c0 - l.disp_px);
           j < std::min(w, l.c1 - l.disp_px); ++j) {
        for (int64_t c = 0; c < 3; ++c)
          scene.sample.right.at(c, i, j) = l.tex.value(c, i, j + l.disp_px);
        scene.right_disp.at(i, j) = d_frac;
      }
  }

  if (spec.view_gain_jitter > 0) {
    // stereo rigs are never photometrically identical; gain applies to the
    // right camera only
    double gain = 1.0 + rng.uniform(-spec.view_gain_jitter, spec.view_gain_jitter);
    for (int64_t i = 0; i < scene.sample.right.size(); ++i)
      scene.sample.right[i] = std::min(1.0, std::max(0.0, scene.sample.right[i] * gain));
  }

  for (int64_t i = 0; i < h * w; ++i)
    scene.sample.gt_depth[i] = num / (scene.left_disp[i] * static_cast<double>(w));
  return scene;
}

Tensor occlusion_mask(const Tensor& left_disp, const Tensor& right_disp) {
  check(left_disp.same_shape(right_disp) && left_disp.rank() == 2,
        "occlusion_mask: expects matching [H,W] buffers");
  int64_t h = left_disp.dim(0), w = left_disp.dim(1);
  Tensor mask({h, w});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j) {
      double d = left_disp.at(i, j);
      int64_t jr = j - static_cast<int64_t>(std::llround(d * static_cast<double>(w)));
      bool occluded = true;
      if (jr >= 0 && jr < w) occluded = std::fabs(right_disp.at(i, jr) - d) > 1e-9;
      mask.at(i, j) = occluded ? 1.0 : 0.0;
    }
  return mask;
}

SyntheticDataset::SyntheticDataset(SyntheticSpec spec, uint64_t seed, int64_t n_train,
                                   int64_t n_val, int64_t n_test)
    : spec_(spec), seed_(seed), n_train_(n_train), n_val_(n_val), n_test_(n_test) {}

int64_t SyntheticDataset::size(Split split) const {
  switch (split) {
    case Split::TRAIN: return n_train_;
    case Split::VAL: return n_val_;
    case Split::TEST: return n_test_;
  }
  return 0;
}

SyntheticScene SyntheticDataset::scene(Split split, int64_t index) const {
  check(index >= 0 && index < size(split), "SyntheticDataset: index out of range");
  uint64_t s = derive_seed(seed_, std::string("synth.") + split_name(split),
                           static_cast<uint64_t>(index));
  return generate_synthetic_scene(spec_, s);
}

StereoSample SyntheticDataset::get(Split split, int64_t index, bool with_gt) const {
  SyntheticScene sc = scene(split, index);
  StereoSample s = std::move(sc.sample);
  s.id = split_name(split) + std::string("_") + std::to_string(index);
  if (!with_gt) s.gt_depth = Tensor();
  return s;
}

std::string SyntheticDataset::id(Split split, int64_t index) const {
  return split_name(split) + std::string("_") + std::to_string(index);
}

std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int64_t epoch) {
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(derive_seed(seed, "shuffle", static_cast<uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

uint64_t augment_seed(uint64_t seed, int64_t epoch, int64_t index) {
  return derive_seed(seed, "augment", static_cast<uint64_t>(epoch) * 1000003ull +
                                          static_cast<uint64_t>(index));
}

}  // namespace depthlab::data
