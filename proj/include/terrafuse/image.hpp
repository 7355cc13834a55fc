#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace terrafuse {

// Row-major, interleaved image. Both 8- and 16-bit data live in 16-bit
// storage; bit_depth records the valid range.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> pixels;

  ImageBuffer() = default;
  // Zero-filled image; throws invalid-argument on bad dimensions.
  ImageBuffer(int width, int height, int channels, int bit_depth);

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint16_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }
  std::uint16_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  int max_value() const { return (1 << bit_depth) - 1; }
  bool empty() const { return pixels.empty(); }

  void validate() const;

  bool operator==(const ImageBuffer&) const = default;
};

// Single-channel luminance (Rec. 601 weights), same bit depth.
ImageBuffer to_gray(const ImageBuffer& image);

// Bilinear sample of channel c. Requires 0 <= u <= width-1 and
// 0 <= v <= height-1.
double sample_bilinear(const ImageBuffer& image, double u, double v, int c = 0);

}  // namespace terrafuse
