#pragma once

#include "depthlab/ops.hpp"

namespace depthlab::geometry {

/// Generator disparities are bounded to this fraction of image width.
inline constexpr double kMaxDisparity = 0.3;

/// Disparity floor applied before converting to depth.
inline constexpr double kDisparityEps = 1e-3;

struct CameraRig {
  double focal_px = 0;
  double baseline_m = 0;
  int64_t width_px = 0;

  bool valid() const { return focal_px > 0 && baseline_m > 0 && width_px > 0; }
};

/// Differentiable horizontal warp of a single image [C,H,W] by a disparity
/// map [H,W] (fraction of width). direction +1 samples at j + d*W (left image
/// -> reconstructed right), -1 at j - d*W (right -> reconstructed left).
/// Out-of-range samples clamp to the edge column.
Var warp(const Var& image, const Var& disparity, int direction);
Tensor warp(const Tensor& image, const Tensor& disparity, int direction);

/// depth(i,j) = focal_px * baseline_m / (max(d, eps) * width_px), in metres.
Tensor disparity_to_depth(const Tensor& disparity, const CameraRig& rig);

/// Inverse of disparity_to_depth (no epsilon guard; depth must be positive).
Tensor depth_to_disparity(const Tensor& depth, const CameraRig& rig);

/// Test-time flip-merge post-processing: the outer 5% of columns on the right
/// come from d, on the left from d_flipped, the rest is the elementwise mean.
/// d_flipped must already be flipped back into d's frame.
Tensor flip_merge(const Tensor& d, const Tensor& d_flipped);

}  // namespace depthlab::geometry
