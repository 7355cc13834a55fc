#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "terrafuse/pointcloud.hpp"

namespace terrafuse {

inline constexpr double kRedBandNm = 670.0;
inline constexpr double kNirBandNm = 800.0;
inline constexpr double kNdviHalfWindowNm = 5.0;

struct Spectrum {
  std::vector<double> values;        // reflectance
  std::vector<double> band_centers;  // nm, increasing

  // Throws invalid-spectrum on length mismatch or unordered bands.
  void validate() const;
};

// One VIS-NIR scan: `columns` spectra sharing one band table, stored
// column-major (all bands of column 0, then column 1, ...).
struct SpectralLine {
  std::vector<double> band_centers;
  int columns = 0;
  std::vector<float> values;

  std::size_t band_count() const { return band_centers.size(); }
  std::span<const float> column(int c) const {
    return {values.data() + static_cast<std::size_t>(c) * band_count(), band_count()};
  }
  Spectrum spectrum(int c) const;
  void validate() const;

  bool operator==(const SpectralLine&) const = default;
};

// Mean of the bands within half_width of center_nm.
double band_mean(std::span<const float> values, std::span<const double> band_centers,
                 double center_nm, double half_width_nm = kNdviHalfWindowNm);
double band_mean(const Spectrum& s, double center_nm,
                 double half_width_nm = kNdviHalfWindowNm);

// (nir - red) / (nir + red), clamped to [-1, 1].
double ndvi(double nir, double red);
double ndvi(const Spectrum& s);
double ndvi(std::span<const float> values, std::span<const double> band_centers);

struct ChannelMeans {
  double r = 0.0, g = 0.0, b = 0.0;
  double max() const { return std::max({r, g, b}); }
};

// Means of the first, second and last 100 bands. Needs at least 300 bands.
ChannelMeans false_color_means(std::span<const double> values);
ChannelMeans false_color_means(const Spectrum& s);

// Channel means scaled so that `scale_max` maps to 255.
Rgb false_color(const ChannelMeans& means, double scale_max);
// Scaled by the spectrum's own largest channel mean.
Rgb false_color(const Spectrum& s);
// Whole line, scaled by the largest channel mean over the line.
std::vector<Rgb> false_color_line(const SpectralLine& line);

}  // namespace terrafuse
