#pragma once

#include <string>

#include "depthlab/tensor.hpp"

namespace depthlab::io {

/// Decodes an 8-bit PNG into [C,H,W] with values in [0,1]; C is 1 or 3
/// (palette expanded, alpha stripped). Throws std::runtime_error naming the
/// path on failure.
Tensor read_image_png(const std::string& path);

/// Encodes [C,H,W] (C in {1,3}) or [H,W] values in [0,1] as an 8-bit PNG.
void write_image_png(const std::string& path, const Tensor& image);

/// Reads a 16-bit grayscale PNG depth raster; metres = raw/256, 0 = missing.
Tensor read_depth_png16(const std::string& path);

/// Writes metres as 16-bit PNG with the raw = metres*256 convention.
void write_depth_png16(const std::string& path, const Tensor& depth_m);

/// Bilinear resize of [C,H,W] or [H,W] grids.
Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w);

}  // namespace depthlab::io
