#include "terrafuse/image.hpp"

#include <algorithm>
#include <cmath>

#include "terrafuse/error.hpp"

namespace terrafuse {

ImageBuffer::ImageBuffer(int w, int h, int c, int bd)
    : width(w), height(h), channels(c), bit_depth(bd) {
  if (w <= 0 || h <= 0) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  if (c != 1 && c != 3) fail(ErrorCode::kInvalidArgument, "channels must be 1 or 3");
  if (bd != 8 && bd != 16) fail(ErrorCode::kInvalidArgument, "bit depth must be 8 or 16");
  pixels.assign(static_cast<std::size_t>(w) * h * c, 0);
}

void ImageBuffer::validate() const {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3) ||
      (bit_depth != 8 && bit_depth != 16)) {
    fail(ErrorCode::kInvalidArgument, "malformed image header");
  }
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    fail(ErrorCode::kInvalidArgument, "pixel count does not match image size");
  }
  if (bit_depth == 8 &&
      std::any_of(pixels.begin(), pixels.end(), [](auto p) { return p > 255; })) {
    fail(ErrorCode::kInvalidArgument, "8-bit image holds values above 255");
  }
}

ImageBuffer to_gray(const ImageBuffer& image) {
  if (image.channels == 1) return image;
  ImageBuffer gray(image.width, image.height, 1, image.bit_depth);
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * image.pixels[3 * i] + 0.587 * image.pixels[3 * i + 1] +
                     0.114 * image.pixels[3 * i + 2];
    gray.pixels[i] = static_cast<std::uint16_t>(
        std::min<double>(std::lround(y), image.max_value()));
  }
  return gray;
}

double sample_bilinear(const ImageBuffer& image, double u, double v, int c) {
  const int x0 = std::min(static_cast<int>(std::floor(u)), image.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(v)), image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double a = image.at(x0, y0, c);
  const double b = image.at(x1, y0, c);
  const double d = image.at(x0, y1, c);
  const double e = image.at(x1, y1, c);
  // Lerp form: equal corners give back exactly that value.
  const double top = a + fx * (b - a);
  const double bottom = d + fx * (e - d);
  return top + fy * (bottom - top);
}

}  // namespace terrafuse
