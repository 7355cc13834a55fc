#pragma once

#include <filesystem>
#include <span>

#include "terrafuse/fusionmap.hpp"
#include "terrafuse/image.hpp"

namespace terrafuse {

// 8-bit gray or RGB image to PNG; throws io-error.
void write_png(const ImageBuffer& image, const std::filesystem::path& path);
ImageBuffer read_png(const std::filesystem::path& path);

// Line plot of a series with vertical markers at alarm times. Non-finite
// values leave gaps.
ImageBuffer plot_series(std::span<const double> t, std::span<const double> values,
                        std::span<const double> alarms, int width = 640, int height = 240);

enum class MapLayer { kRgb, kThermal, kNdvi };

// Orthographic top view (x right, y up), one pixel per pixel_size meters,
// highest point wins. Scalar layers use a blue-to-red ramp over their range;
// cells without data stay black.
ImageBuffer render_top_view(const MultiLayerMap& map, MapLayer layer, double pixel_size);

}  // namespace terrafuse
