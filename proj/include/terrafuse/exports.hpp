#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "terrafuse/cusum.hpp"
#include "terrafuse/fusionmap.hpp"
#include "terrafuse/terrafeat.hpp"

namespace terrafuse {

// ASCII PLY with vertex properties x y z red green blue thermal ndvi
// frame_id; absent layers are written as `nan`. Reals use 9 significant
// digits. The cell size is kept in a header comment.
void export_ply(const MultiLayerMap& map, const std::filesystem::path& path);
MultiLayerMap read_ply(const std::filesystem::path& path);

// Header: t_mid, the 21 feature names, then color_degenerate,
// thermal_degenerate, ndvi_degenerate, accel_degenerate (0/1).
std::string features_csv_header();
void export_features_csv(std::span<const FeatureVector> rows, const std::filesystem::path& path);
// Throws parse-error naming the offending line.
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

// t, feature_name, s_plus, s_minus, h
void export_events_csv(std::span<const ChangeEvent> events, const std::filesystem::path& path);
std::vector<ChangeEvent> read_events_csv(const std::filesystem::path& path);

// Shortest decimal text that parses back to the same double; "nan" for NaN.
std::string format_real(double v);
double parse_real(const std::string& token);

}  // namespace terrafuse
