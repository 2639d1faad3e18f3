#include "depthlab/geometry.hpp"

#include <cmath>

namespace depthlab::geometry {

namespace {
// [C,H,W] -> [1,C,H,W], [H,W] -> [1,H,W]
Var as_batch_image(const Var& image) {
  check(image.val().rank() == 3, "warp: image must be [C,H,W]");
  auto s = image.shape();
  return ops::reshape(image, {1, s[0], s[1], s[2]});
}
Var as_batch_disp(const Var& disp) {
  check(disp.val().rank() == 2, "warp: disparity must be [H,W]");
  auto s = disp.shape();
  return ops::reshape(disp, {1, s[0], s[1]});
}
}  // namespace

Var warp(const Var& image, const Var& disparity, int direction) {
  Var out = ops::warp(as_batch_image(image), as_batch_disp(disparity), direction);
  auto s = image.shape();
  return ops::reshape(out, {s[0], s[1], s[2]});
}

Tensor warp(const Tensor& image, const Tensor& disparity, int direction) {
  NoRecordGuard norec;
  return warp(Var::leaf(image), Var::leaf(disparity), direction).val();
}

Tensor disparity_to_depth(const Tensor& disparity, const CameraRig& rig) {
  check(rig.valid(), "disparity_to_depth: invalid camera rig");
  Tensor depth(disparity.shape());
  double num = rig.focal_px * rig.baseline_m;
  double w = static_cast<double>(rig.width_px);
  for (int64_t i = 0; i < disparity.size(); ++i) {
    check(disparity[i] >= 0.0, "disparity_to_depth: negative disparity");
    depth[i] = num / (std::max(disparity[i], kDisparityEps) * w);
  }
  return depth;
}

Tensor depth_to_disparity(const Tensor& depth, const CameraRig& rig) {
  check(rig.valid(), "depth_to_disparity: invalid camera rig");
  Tensor disp(depth.shape());
  double num = rig.focal_px * rig.baseline_m;
  double w = static_cast<double>(rig.width_px);
  for (int64_t i = 0; i < depth.size(); ++i) {
    check(depth[i] > 0.0, "depth_to_disparity: non-positive depth");
    disp[i] = num / (depth[i] * w);
  }
  return disp;
}

Tensor flip_merge(const Tensor& d, const Tensor& d_flipped) {
  check(d.same_shape(d_flipped), "flip_merge: dimension mismatch");
  check(d.rank() == 2, "flip_merge: expects [H,W]");
  int64_t h = d.dim(0), w = d.dim(1);
  int64_t band = static_cast<int64_t>(std::floor(0.05 * static_cast<double>(w)));
  Tensor out({h, w});
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j) {
      if (j >= w - band)
        out.at(i, j) = d.at(i, j);
      else if (j < band)
        out.at(i, j) = d_flipped.at(i, j);
      else
        out.at(i, j) = 0.5 * (d.at(i, j) + d_flipped.at(i, j));
    }
  return out;
}

}  // namespace depthlab::geometry
