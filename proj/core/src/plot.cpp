#include "depthlab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "depthlab/image_io.hpp"

namespace depthlab::plot {

Canvas::Canvas(int64_t height, int64_t width, double r, double g, double b)
    : img_({3, height, width}) {
  for (int64_t i = 0; i < height * width; ++i) {
    img_[i] = r;
    img_[height * width + i] = g;
    img_[2 * height * width + i] = b;
  }
}

void Canvas::set(int64_t y, int64_t x, double r, double g, double b) {
  if (y < 0 || y >= img_.dim(1) || x < 0 || x >= img_.dim(2)) return;
  img_.at(0, y, x) = r;
  img_.at(1, y, x) = g;
  img_.at(2, y, x) = b;
}

void Canvas::line(int64_t y0, int64_t x0, int64_t y1, int64_t x1, double r, double g, double b) {
  int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int64_t err = dx + dy;
  while (true) {
    set(y0, x0, r, g, b);
    if (x0 == x1 && y0 == y1) break;
    int64_t e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::disc(int64_t y, int64_t x, int64_t radius, double r, double g, double b) {
  for (int64_t i = -radius; i <= radius; ++i)
    for (int64_t j = -radius; j <= radius; ++j)
      if (i * i + j * j <= radius * radius) set(y + i, x + j, r, g, b);
}

void Canvas::rect(int64_t y0, int64_t x0, int64_t y1, int64_t x1, double r, double g, double b) {
  line(y0, x0, y0, x1, r, g, b);
  line(y1, x0, y1, x1, r, g, b);
  line(y0, x0, y1, x0, r, g, b);
  line(y0, x1, y1, x1, r, g, b);
}

namespace {
// 3x5 glyphs, rows top to bottom, 3 bits per row
const uint16_t* glyph_of(char c) {
  static const uint16_t digits[10][5] = {
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
      {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}};
  static const uint16_t dot[5] = {0, 0, 0, 0, 2};
  static const uint16_t minus[5] = {0, 0, 7, 0, 0};
  static const uint16_t e_[5] = {7, 4, 7, 4, 7};
  static const uint16_t plus[5] = {0, 2, 7, 2, 0};
  static const uint16_t blank[5] = {0, 0, 0, 0, 0};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '.') return dot;
  if (c == '-') return minus;
  if (c == 'e' || c == 'E') return e_;
  if (c == '+') return plus;
  return blank;
}
}  // namespace

void Canvas::text(int64_t y, int64_t x, const std::string& s, int scale, double r, double g,
                  double b) {
  int64_t cx = x;
  for (char c : s) {
    const uint16_t* gl = glyph_of(c);
    for (int row = 0; row < 5; ++row)
      for (int col = 0; col < 3; ++col)
        if (gl[row] & (4 >> col))
          for (int i = 0; i < scale; ++i)
            for (int j = 0; j < scale; ++j)
              set(y + row * scale + i, cx + col * scale + j, r, g, b);
    cx += 4 * scale;
  }
}

void Canvas::blit(int64_t y, int64_t x, const Tensor& image) {
  Tensor img = image.rank() == 2 ? image.reshaped({1, image.dim(0), image.dim(1)}) : image;
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j) {
      double r = img.at(0, i, j);
      double g = c == 3 ? img.at(1, i, j) : r;
      double b = c == 3 ? img.at(2, i, j) : r;
      set(y + i, x + j, r, g, b);
    }
}

void Canvas::save(const std::string& path) const { io::write_image_png(path, img_); }

namespace {
std::string fmt(double v) {
  char buf[32];
  if (v == 0)
    std::snprintf(buf, sizeof buf, "0");
  else if (std::fabs(v) >= 0.01 && std::fabs(v) < 10000)
    std::snprintf(buf, sizeof buf, "%.3g", v);
  else
    std::snprintf(buf, sizeof buf, "%.1e", v);
  return buf;
}
}  // namespace

void line_chart(const std::string& path, const std::vector<Series>& series, int64_t height,
                int64_t width) {
  Canvas cv(height, width);
  int64_t m = 50;  // margin
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) {
    return m + static_cast<int64_t>((x - xmin) / (xmax - xmin) * static_cast<double>(width - 2 * m));
  };
  auto py = [&](double y) {
    return height - m -
           static_cast<int64_t>((y - ymin) / (ymax - ymin) * static_cast<double>(height - 2 * m));
  };
  cv.rect(m, m, height - m, width - m, 0.6, 0.6, 0.6);
  for (int t = 0; t <= 4; ++t) {
    double xv = xmin + (xmax - xmin) * t / 4.0;
    double yv = ymin + (ymax - ymin) * t / 4.0;
    cv.line(height - m, px(xv), height - m + 4, px(xv), 0.3, 0.3, 0.3);
    cv.text(height - m + 8, px(xv) - 10, fmt(xv), 2, 0.2, 0.2, 0.2);
    cv.line(m - 4, py(yv), m, py(yv), 0.3, 0.3, 0.3);
    cv.text(py(yv) - 5, 2, fmt(yv), 2, 0.2, 0.2, 0.2);
  }
  int64_t ly = m + 6;
  for (const auto& s : series) {
    for (size_t i = 1; i < s.x.size(); ++i)
      cv.line(py(s.y[i - 1]), px(s.x[i - 1]), py(s.y[i]), px(s.x[i]), s.r, s.g, s.b);
    cv.line(ly, width - m - 60, ly, width - m - 40, s.r, s.g, s.b);
    ly += 12;
  }
  cv.save(path);
}

void scatter_chart(const std::string& path, const std::vector<std::pair<double, double>>& points,
                   int64_t height, int64_t width) {
  Canvas cv(height, width);
  int64_t m = 50;
  double lo = 1e300, hi = -1e300;
  for (const auto& [a, b] : points) {
    lo = std::min({lo, a, b});
    hi = std::max({hi, a, b});
  }
  if (lo > hi) {
    lo = 0;
    hi = 1;
  }
  if (hi == lo) hi = lo + 1;
  double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double v) {
    return m + static_cast<int64_t>((v - lo) / (hi - lo) * static_cast<double>(width - 2 * m));
  };
  auto py = [&](double v) {
    return height - m -
           static_cast<int64_t>((v - lo) / (hi - lo) * static_cast<double>(height - 2 * m));
  };
  cv.rect(m, m, height - m, width - m, 0.6, 0.6, 0.6);
  cv.line(py(lo), px(lo), py(hi), px(hi), 0.7, 0.7, 0.7);  // diagonal
  for (int t = 0; t <= 4; ++t) {
    double v = lo + (hi - lo) * t / 4.0;
    cv.text(height - m + 8, px(v) - 10, fmt(v), 2, 0.2, 0.2, 0.2);
    cv.text(py(v) - 5, 2, fmt(v), 2, 0.2, 0.2, 0.2);
  }
  for (const auto& [a, b] : points) cv.disc(py(b), px(a), 3, 0.85, 0.25, 0.1);
  cv.save(path);
}

Tensor colorize(const Tensor& map, double lo, double hi) {
  check(map.rank() == 2, "colorize: expects [H,W]");
  Tensor out({3, map.dim(0), map.dim(1)});
  double span = hi > lo ? hi - lo : 1.0;
  // dark blue -> teal -> green -> yellow ramp
  const double stops[4][3] = {{0.05, 0.03, 0.35}, {0.0, 0.5, 0.6}, {0.2, 0.75, 0.3}, {0.98, 0.9, 0.1}};
  for (int64_t i = 0; i < map.size(); ++i) {
    double t = std::min(1.0, std::max(0.0, (map[i] - lo) / span)) * 3.0;
    int k = std::min(2, static_cast<int>(t));
    double f = t - k;
    for (int c = 0; c < 3; ++c)
      out[c * map.size() + i] = stops[k][c] * (1 - f) + stops[k + 1][c] * f;
  }
  return out;
}

void triptych(const std::string& path, const Tensor& input, const Tensor& disparity,
              const Tensor& reconstruction) {
  int64_t h = input.dim(1), w = input.dim(2);
  int64_t gap = 4;
  Canvas cv(h, 3 * w + 2 * gap, 0, 0, 0);
  cv.blit(0, 0, input);
  double lo = 1e300, hi = -1e300;
  for (int64_t i = 0; i < disparity.size(); ++i) {
    lo = std::min(lo, disparity[i]);
    hi = std::max(hi, disparity[i]);
  }
  cv.blit(0, w + gap, colorize(disparity, lo, hi));
  cv.blit(0, 2 * (w + gap), reconstruction);
  cv.save(path);
}

}  // namespace depthlab::plot
