#pragma once

#include <string>
#include <vector>

#include "depthlab/tensor.hpp"

namespace depthlab::plot {

/// RGB raster canvas for the static figures the CLI emits.
class Canvas {
 public:
  Canvas(int64_t height, int64_t width, double r = 1, double g = 1, double b = 1);

  void set(int64_t y, int64_t x, double r, double g, double b);
  void line(int64_t y0, int64_t x0, int64_t y1, int64_t x1, double r, double g, double b);
  void disc(int64_t y, int64_t x, int64_t radius, double r, double g, double b);
  void rect(int64_t y0, int64_t x0, int64_t y1, int64_t x1, double r, double g, double b);
  /// 3x5 bitmap glyphs for digits, '.', '-', 'e', scaled by `scale`.
  void text(int64_t y, int64_t x, const std::string& s, int scale, double r, double g, double b);
  void blit(int64_t y, int64_t x, const Tensor& image);  // [C,H,W] or [H,W] in [0,1]

  const Tensor& image() const { return img_; }
  void save(const std::string& path) const;

 private:
  Tensor img_;  // [3,H,W]
};

struct Series {
  std::string label;
  std::vector<double> x, y;
  double r = 0, g = 0, b = 0;
};

/// Line chart with axes and numeric tick labels.
void line_chart(const std::string& path, const std::vector<Series>& series, int64_t height = 480,
                int64_t width = 720);

/// Scatter of paired per-image metrics with the y=x diagonal.
void scatter_chart(const std::string& path, const std::vector<std::pair<double, double>>& points,
                   int64_t height = 600, int64_t width = 600);

/// Maps a [H,W] map through a perceptual-ish color ramp (low=dark blue,
/// high=yellow), normalized to [lo,hi].
Tensor colorize(const Tensor& map, double lo, double hi);

/// Horizontal strip montage: input / colorized disparity / reconstruction.
void triptych(const std::string& path, const Tensor& input, const Tensor& disparity,
              const Tensor& reconstruction);

}  // namespace depthlab::plot
