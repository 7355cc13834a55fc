#include "terrafuse/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "terrafuse/error.hpp"

namespace terrafuse {

namespace {

void check_bands(std::span<const double> centers) {
  for (std::size_t i = 1; i < centers.size(); ++i) {
    if (!(centers[i] > centers[i - 1])) {
      fail(ErrorCode::kInvalidSpectrum, "band centers must be strictly increasing");
    }
  }
}

template <typename T>
double window_mean(std::span<const T> values, std::span<const double> centers,
                   double center, double half) {
  const auto lo = std::lower_bound(centers.begin(), centers.end(), center - half);
  long double sum = 0.0L;
  std::size_t n = 0;
  for (auto it = lo; it != centers.end() && *it <= center + half; ++it) {
    sum += static_cast<long double>(values[it - centers.begin()]);
    ++n;
  }
  if (n == 0) {
    fail(ErrorCode::kInvalidSpectrum,
         "no bands within " + std::to_string(half) + " nm of " + std::to_string(center) + " nm");
  }
  return static_cast<double>(sum / static_cast<long double>(n));
}

template <typename T>
ChannelMeans segment_means(std::span<const T> v) {
  if (v.size() < 300) {
    fail(ErrorCode::kInvalidSpectrum,
         "false color needs at least 300 bands, got " + std::to_string(v.size()));
  }
  auto mean = [&](std::size_t first) {
    long double s = 0.0L;
    for (std::size_t i = first; i < first + 100; ++i) s += v[i];
    return static_cast<double>(s / 100.0L);
  };
  return {mean(0), mean(100), mean(v.size() - 100)};
}

}  // namespace

void Spectrum::validate() const {
  if (values.size() != band_centers.size()) {
    fail(ErrorCode::kInvalidSpectrum, "spectrum values and band centers differ in length");
  }
  check_bands(band_centers);
}

Spectrum SpectralLine::spectrum(int c) const {
  const auto col = column(c);
  return {std::vector<double>(col.begin(), col.end()), band_centers};
}

void SpectralLine::validate() const {
  check_bands(band_centers);
  if (columns < 0 || values.size() != static_cast<std::size_t>(columns) * band_count()) {
    fail(ErrorCode::kInvalidSpectrum, "spectral line size does not match its header");
  }
}

double band_mean(std::span<const float> values, std::span<const double> centers,
                 double center_nm, double half_width_nm) {
  return window_mean(values, centers, center_nm, half_width_nm);
}

double band_mean(const Spectrum& s, double center_nm, double half_width_nm) {
  s.validate();
  return window_mean(std::span<const double>(s.values), s.band_centers, center_nm,
                     half_width_nm);
}

double ndvi(double nir, double red) {
  // Extended precision keeps hand-checkable cases exact, e.g. (0.8, 0.2).
  const long double n = nir;
  const long double r = red;
  const long double den = n + r;
  if (den == 0.0L) fail(ErrorCode::kUndefinedNdvi, "NIR + RED is zero");
  const double v = static_cast<double>((n - r) / den);
  return std::clamp(v, -1.0, 1.0);
}

double ndvi(const Spectrum& s) {
  return ndvi(band_mean(s, kNirBandNm), band_mean(s, kRedBandNm));
}

double ndvi(std::span<const float> values, std::span<const double> centers) {
  return ndvi(band_mean(values, centers, kNirBandNm), band_mean(values, centers, kRedBandNm));
}

ChannelMeans false_color_means(std::span<const double> values) {
  return segment_means(values);
}

ChannelMeans false_color_means(const Spectrum& s) {
  return segment_means(std::span<const double>(s.values));
}

Rgb false_color(const ChannelMeans& m, double scale_max) {
  auto to8 = [&](double x) -> std::uint8_t {
    if (!(scale_max > 0.0)) return 0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(x / scale_max, 0.0, 1.0) * 255.0));
  };
  return {to8(m.r), to8(m.g), to8(m.b)};
}

Rgb false_color(const Spectrum& s) {
  const ChannelMeans m = false_color_means(s);
  return false_color(m, m.max());
}

std::vector<Rgb> false_color_line(const SpectralLine& line) {
  std::vector<ChannelMeans> means;
  means.reserve(line.columns);
  double line_max = 0.0;
  for (int c = 0; c < line.columns; ++c) {
    means.push_back(segment_means(line.column(c)));
    line_max = std::max(line_max, means.back().max());
  }
  std::vector<Rgb> out;
  out.reserve(means.size());
  for (const auto& m : means) out.push_back(false_color(m, line_max));
  return out;
}

}  // namespace terrafuse
