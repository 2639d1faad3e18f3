#include "depthlab/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace depthlab::io {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("png: " + what + ": " + path);
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void read_rows(const std::string& path, int force_bit_depth, std::vector<png_byte>& bytes,
               int64_t& width, int64_t& height, int64_t& channels, int64_t& bit_depth) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(path, "cannot open");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) fail(path, "read struct");
  r.info = png_create_info_struct(r.png);
  if (!r.info) fail(path, "info struct");
  if (setjmp(png_jmpbuf(r.png))) fail(path, "decode error");

  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_byte color = png_get_color_type(r.png, r.info);
  png_byte depth = png_get_bit_depth(r.png, r.info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (force_bit_depth == 8 && depth == 16) png_set_strip_16(r.png);
  if (depth == 16 && force_bit_depth != 8) png_set_swap(r.png);  // little-endian reads
  png_read_update_info(r.png, r.info);

  width = png_get_image_width(r.png, r.info);
  height = png_get_image_height(r.png, r.info);
  channels = png_get_channels(r.png, r.info);
  bit_depth = png_get_bit_depth(r.png, r.info);

  size_t rowbytes = png_get_rowbytes(r.png, r.info);
  bytes.resize(rowbytes * static_cast<size_t>(height));
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int64_t i = 0; i < height; ++i) rows[static_cast<size_t>(i)] = bytes.data() + rowbytes * i;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
}

}  // namespace

Tensor read_image_png(const std::string& path) {
  std::vector<png_byte> bytes;
  int64_t w, h, c, depth;
  read_rows(path, /*force_bit_depth=*/8, bytes, w, h, c, depth);
  if (c != 1 && c != 3) fail(path, "unsupported channel count " + std::to_string(c));
  Tensor out({c, h, w});
  const double scale = 1.0 / 255.0;
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j)
      for (int64_t ch = 0; ch < c; ++ch)
        out.at(ch, i, j) = static_cast<double>(bytes[static_cast<size_t>((i * w + j) * c + ch)]) * scale;
  return out;
}

void write_image_png(const std::string& path, const Tensor& image) {
  Tensor img = image.rank() == 2 ? image.reshaped({1, image.dim(0), image.dim(1)}) : image;
  check(img.rank() == 3 && (img.dim(0) == 1 || img.dim(0) == 3), "write_image_png: expects [C,H,W]");
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  wr.info = png_create_info_struct(wr.png);
  if (!wr.png || !wr.info) fail(path, "write struct");
  if (setjmp(png_jmpbuf(wr.png))) fail(path, "encode error");

  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);

  std::vector<png_byte> row(static_cast<size_t>(w * c));
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j)
      for (int64_t ch = 0; ch < c; ++ch) {
        double v = std::min(1.0, std::max(0.0, img.at(ch, i, j)));
        row[static_cast<size_t>(j * c + ch)] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(wr.png, row.data());
  }
  png_write_end(wr.png, nullptr);
}

Tensor read_depth_png16(const std::string& path) {
  std::vector<png_byte> bytes;
  int64_t w, h, c, depth;
  read_rows(path, /*force_bit_depth=*/16, bytes, w, h, c, depth);
  if (c != 1) fail(path, "depth raster must be single channel");
  if (depth != 16) fail(path, "depth raster must be 16-bit");
  Tensor out({h, w});
  const auto* px = reinterpret_cast<const uint16_t*>(bytes.data());
  for (int64_t i = 0; i < h * w; ++i) out[i] = static_cast<double>(px[i]) / 256.0;
  return out;
}

void write_depth_png16(const std::string& path, const Tensor& depth_m) {
  check(depth_m.rank() == 2, "write_depth_png16: expects [H,W]");
  int64_t h = depth_m.dim(0), w = depth_m.dim(1);

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  wr.info = png_create_info_struct(wr.png);
  if (!wr.png || !wr.info) fail(path, "write struct");
  if (setjmp(png_jmpbuf(wr.png))) fail(path, "encode error");

  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  png_set_swap(wr.png);

  std::vector<uint16_t> row(static_cast<size_t>(w));
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      double raw = std::lround(std::min(65535.0, std::max(0.0, depth_m.at(i, j) * 256.0)));
      row[static_cast<size_t>(j)] = static_cast<uint16_t>(raw);
    }
    png_write_row(wr.png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(wr.png, nullptr);
}

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w) {
  bool flat = image.rank() == 2;
  Tensor img = flat ? image.reshaped({1, image.dim(0), image.dim(1)}) : image;
  check(img.rank() == 3, "resize_bilinear: expects [C,H,W] or [H,W]");
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, out_h, out_w});
  double sy = static_cast<double>(h) / static_cast<double>(out_h);
  double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (int64_t i = 0; i < out_h; ++i) {
    double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
    int64_t y0 = static_cast<int64_t>(std::floor(fy));
    int64_t y1 = std::min(y0 + 1, h - 1);
    double wy = fy - static_cast<double>(y0);
    for (int64_t j = 0; j < out_w; ++j) {
      double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
      int64_t x0 = static_cast<int64_t>(std::floor(fx));
      int64_t x1 = std::min(x0 + 1, w - 1);
      double wx = fx - static_cast<double>(x0);
      for (int64_t ch = 0; ch < c; ++ch) {
        double v00 = img.at(ch, y0, x0), v01 = img.at(ch, y0, x1);
        double v10 = img.at(ch, y1, x0), v11 = img.at(ch, y1, x1);
        out.at(ch, i, j) = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return flat ? out.reshaped({out_h, out_w}) : out;
}

}  // namespace depthlab::io
