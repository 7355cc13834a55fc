#pragma once

#include <filesystem>

#include "terrafuse/image.hpp"

namespace terrafuse {

// Binary PGM (P5) for single-channel and PPM (P6) for three-channel images;
// 16-bit samples are big-endian as the format requires.
void write_netpbm(const ImageBuffer& image, const std::filesystem::path& path);
ImageBuffer read_netpbm(const std::filesystem::path& path);

}  // namespace terrafuse
