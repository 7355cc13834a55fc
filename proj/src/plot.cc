#include "terrafuse/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "terrafuse/error.hpp"

namespace terrafuse {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

using Color = std::array<std::uint16_t, 3>;

void put(ImageBuffer& img, int x, int y, const Color& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
}

void line(ImageBuffer& img, int x0, int y0, int x1, int y1, const Color& c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

// Blue (0) through green to red (1).
Color ramp(double s) {
  s = std::clamp(s, 0.0, 1.0);
  const double r = std::clamp(2.0 * s - 1.0, 0.0, 1.0);
  const double b = std::clamp(1.0 - 2.0 * s, 0.0, 1.0);
  const double g = 1.0 - r - b;
  return {static_cast<std::uint16_t>(std::lround(255 * r)),
          static_cast<std::uint16_t>(std::lround(255 * g)),
          static_cast<std::uint16_t>(std::lround(255 * b))};
}

// The setjmp frames below hold no objects with destructors; buffers are
// owned by the callers.
bool encode_png(png_structp png, png_infop info, std::FILE* f, const ImageBuffer& image,
                png_bytep row) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = std::size_t(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    for (std::size_t i = 0; i < stride; ++i) {
      row[i] = static_cast<png_byte>(image.pixels[std::size_t(y) * stride + i]);
    }
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  return true;
}

bool read_png_header(png_structp png, png_infop info, std::FILE* f) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  return true;
}

bool read_png_row(png_structp png, png_bytep row) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_row(png, row, nullptr);
  return true;
}

}  // namespace

void write_png(const ImageBuffer& image, const fs::path& path) {
  image.validate();
  if (image.bit_depth != 8) fail(ErrorCode::kInvalidArgument, "PNG export takes 8-bit images");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(ErrorCode::kIoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIoError, "libpng initialization failed");
  }
  std::vector<png_byte> row(std::size_t(image.width) * image.channels);
  const bool ok = encode_png(png, info, f.get(), image, row.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) fail(ErrorCode::kIoError, "PNG encoding failed for " + path.string());
}

ImageBuffer read_png(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::kMissingPayload, "cannot read " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIoError, "libpng initialization failed");
  }
  bool ok = read_png_header(png, info, f.get());
  ImageBuffer img;
  if (ok) {
    const int w = png_get_image_width(png, info);
    const int h = png_get_image_height(png, info);
    const int ch = png_get_channels(png, info);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    img = ImageBuffer(w, h, ch == 1 ? 1 : 3, 8);
    for (int y = 0; y < h && ok; ++y) {
      ok = read_png_row(png, row.data());
      for (int x = 0; x < w && ok; ++x) {
        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = row[std::size_t(x) * ch + c];
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) fail(ErrorCode::kParseError, path.string() + " is not a readable PNG");
  return img;
}

ImageBuffer plot_series(std::span<const double> t, std::span<const double> values,
                        std::span<const double> alarms, int width, int height) {
  if (t.size() != values.size()) fail(ErrorCode::kInvalidArgument, "plot needs one value per time");
  ImageBuffer img(width, height, 3, 8);
  std::fill(img.pixels.begin(), img.pixels.end(), 255);
  const int margin = 8;
  const Color frame{160, 160, 160}, series{30, 60, 200}, alarm{220, 30, 30};
  line(img, margin, margin, width - margin, margin, frame);
  line(img, margin, height - margin, width - margin, height - margin, frame);
  line(img, margin, margin, margin, height - margin, frame);
  line(img, width - margin, margin, width - margin, height - margin, frame);
  if (t.empty()) return img;

  double t0 = t.front(), t1 = t.back();
  if (!(t1 > t0)) t1 = t0 + 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  } else if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    lo -= 1.0;
    hi += 1.0;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  auto px = [&](double tt) {
    return margin + static_cast<int>(std::lround((tt - t0) / (t1 - t0) * (width - 2 * margin)));
  };
  auto py = [&](double v) {
    return height - margin - static_cast<int>(std::lround((v - lo) / (hi - lo) * (height - 2 * margin)));
  };
  for (double a : alarms) line(img, px(a), margin, px(a), height - margin, alarm);
  bool have_prev = false;
  int prev_x = 0, prev_y = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(values[i])) {
      have_prev = false;
      continue;
    }
    const int x = px(t[i]), y = py(values[i]);
    if (have_prev) line(img, prev_x, prev_y, x, y, series);
    put(img, x, y, series);
    prev_x = x;
    prev_y = y;
    have_prev = true;
  }
  return img;
}

ImageBuffer render_top_view(const MultiLayerMap& map, MapLayer layer, double pixel_size) {
  if (!(pixel_size > 0.0)) fail(ErrorCode::kInvalidArgument, "pixel size must be positive");
  if (map.empty()) fail(ErrorCode::kEmptyMap, "top view of an empty map");
  const Aabb box = bounds_of(map.points);
  const double wx = std::floor((box.max.x() - box.min.x()) / pixel_size) + 1;
  const double wy = std::floor((box.max.y() - box.min.y()) / pixel_size) + 1;
  if (wx * wy > 64e6) fail(ErrorCode::kInvalidArgument, "top view would exceed 64 Mpx; raise the pixel size");
  const int w = static_cast<int>(wx), h = static_cast<int>(wy);

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  if (layer == MapLayer::kNdvi) {
    lo = -1.0;
    hi = 1.0;
  } else if (layer == MapLayer::kThermal) {
    for (const MapPoint& p : map.points) {
      if (p.thermal) {
        lo = std::min(lo, *p.thermal);
        hi = std::max(hi, *p.thermal);
      }
    }
    if (!(hi > lo)) hi = lo + 1.0;
  }

  ImageBuffer img(w, h, 3, 8);
  std::vector<double> top(std::size_t(w) * h, -std::numeric_limits<double>::infinity());
  for (const MapPoint& p : map.points) {
    const int x = static_cast<int>((p.position.x() - box.min.x()) / pixel_size);
    const int y = h - 1 - static_cast<int>((p.position.y() - box.min.y()) / pixel_size);
    double& z = top[std::size_t(y) * w + x];
    if (!(p.position.z() > z)) continue;
    Color c;
    if (layer == MapLayer::kRgb) {
      c = {p.rgb[0], p.rgb[1], p.rgb[2]};
    } else {
      const std::optional<double>& v = layer == MapLayer::kThermal ? p.thermal : p.ndvi;
      if (!v) continue;
      c = ramp((*v - lo) / (hi - lo));
    }
    z = p.position.z();
    put(img, x, y, c);
  }
  return img;
}

}  // namespace terrafuse
