#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "depthlab/geometry.hpp"
#include "depthlab/random.hpp"
#include "depthlab/tensor.hpp"

namespace depthlab::data {

struct StereoSample {
  Tensor left, right;  // [3,H,W] in [0,1]
  Tensor gt_depth;     // [H0,W0] metres at native resolution, 0 = missing; empty if absent
  geometry::CameraRig rig;
  std::string id;
};

enum class Split { TRAIN, VAL, TEST };
const char* split_name(Split s);

/// splits/{train,val,test}.txt with one sample id per line.
struct SplitManifest {
  std::vector<std::string> train, val, test;

  static SplitManifest load(const std::string& dataset_root);
  const std::vector<std::string>& ids(Split s) const;
};

/// Uniform random access to decoded samples; get() is deterministic so
/// loading can run from any number of worker contexts.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual int64_t size(Split split) const = 0;
  virtual StereoSample get(Split split, int64_t index, bool with_gt) const = 0;
  virtual std::string id(Split split, int64_t index) const = 0;
};

enum class FolderConvention { KITTI, CITYSCAPES };

/// Dataset root layout: images/<id>_L.png, images/<id>_R.png,
/// depth/<id>.png (optional, 16-bit metres*256), splits/{train,val,test}.txt.
/// KITTI convention resizes frames to target_h x target_w; CITYSCAPES first
/// applies the artifact crop (top 50/1024 and bottom 224/1024 of the rows,
/// then symmetric side columns restoring the 2:1 ratio).
class FolderDataset final : public Dataset {
 public:
  FolderDataset(std::string root, FolderConvention convention, geometry::CameraRig rig,
                int64_t target_h = 256, int64_t target_w = 512);

  int64_t size(Split split) const override;
  StereoSample get(Split split, int64_t index, bool with_gt) const override;
  std::string id(Split split, int64_t index) const override;
  const SplitManifest& manifest() const { return manifest_; }

  /// Exposed for tests: crop box {top, bottom_exclusive, left, right_exclusive}
  /// of the CityScapes rule for a H x W frame.
  static std::array<int64_t, 4> cityscapes_crop(int64_t h, int64_t w);

 private:
  std::string root_;
  FolderConvention convention_;
  geometry::CameraRig rig_;
  int64_t target_h_, target_w_;
  SplitManifest manifest_;
};

// ---- augmentation ----

struct AugmentParams {
  bool do_gamma = false, do_brightness = false, do_color = false, do_flip = false;
  double gamma = 1.0;
  double brightness = 1.0;
  double color[3] = {1.0, 1.0, 1.0};
};

/// Coin-flips each transform with probability 1/2 and draws gamma ~ U(0.8,1.2),
/// brightness ~ U(0.5,2.0), per-channel color ~ U(0.8,1.2).
AugmentParams sample_augment_params(uint64_t seed);

/// Applies the photometric transforms identically to both images (clamped to
/// [0,1]); a flip mirrors both images and swaps the left/right roles.
/// Identity params return the sample bit-unchanged.
StereoSample apply_augment(const StereoSample& sample, const AugmentParams& params);

inline StereoSample augment(const StereoSample& sample, uint64_t seed) {
  return apply_augment(sample, sample_augment_params(seed));
}

// ---- synthetic stereo scenes ----

/// Layered fronto-parallel scene spec. Layer disparities are integer pixel
/// counts (depth follows as focal*baseline/p), so warping one view with the
/// ground-truth disparity reproduces the other exactly outside occlusions.
struct SyntheticSpec {
  int64_t height = 64, width = 128;
  geometry::CameraRig rig{100.0, 0.5, 128};
  int min_layers = 1, max_layers = 4;   // foreground rectangles
  int min_disp_px = 2, max_disp_px = 10;
  bool shade_by_depth = true;           // nearer layers rendered brighter
  int texture_waves = 4;
  // realism knobs (default off so gt-disparity warping inverts exactly):
  double view_gain_jitter = 0.0;   // right view scaled by 1 + U(-j, j) per scene
  double flat_layer_prob = 0.0;    // chance a foreground layer is near-textureless
};

struct SyntheticScene {
  StereoSample sample;   // gt_depth dense and exact, aligned to the left view
  Tensor left_disp;      // [H,W] ground-truth disparity (fraction of width)
  Tensor right_disp;     // [H,W] disparity buffer aligned to the right view
};

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec, uint64_t seed);

/// Pixels of the left view with no counterpart in the right view (nearer
/// layer in front), derived from the two disparity buffers.
Tensor occlusion_mask(const Tensor& left_disp, const Tensor& right_disp);

class SyntheticDataset final : public Dataset {
 public:
  SyntheticDataset(SyntheticSpec spec, uint64_t seed, int64_t n_train, int64_t n_val,
                   int64_t n_test);

  int64_t size(Split split) const override;
  StereoSample get(Split split, int64_t index, bool with_gt) const override;
  std::string id(Split split, int64_t index) const override;
  SyntheticScene scene(Split split, int64_t index) const;
  const SyntheticSpec& spec() const { return spec_; }

 private:
  SyntheticSpec spec_;
  uint64_t seed_;
  int64_t n_train_, n_val_, n_test_;
};

/// Deterministic epoch ordering: a pure function of (seed, epoch).
std::vector<int64_t> epoch_order(int64_t n, uint64_t seed, int64_t epoch);

/// Per-sample augmentation seed, fixed per (seed, epoch, index).
uint64_t augment_seed(uint64_t seed, int64_t epoch, int64_t index);

}  // namespace depthlab::data
