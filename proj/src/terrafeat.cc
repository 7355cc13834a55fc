#include "terrafuse/terrafeat.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "terrafuse/error.hpp"

namespace terrafuse {

void Footprint::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    fail(ErrorCode::kInvalidArgument, "footprint must have positive area");
  }
}

std::vector<GroundPatch> segment_patches(const MultiLayerMap& map, const Trajectory& traj,
                                         std::span<const double> frame_times,
                                         const PatchParams& params) {
  if (traj.empty()) fail(ErrorCode::kEmptyTrajectory, "patch segmentation needs poses");
  params.footprint.validate();
  if (params.frames_per_patch < 1) {
    fail(ErrorCode::kInvalidArgument, "frames_per_patch must be >= 1");
  }
  const int stride = params.stride > 0 ? params.stride : params.frames_per_patch;
  const int n = static_cast<int>(frame_times.size());
  std::vector<GroundPatch> patches;
  for (int first = 0; first + params.frames_per_patch <= n; first += stride) {
    GroundPatch patch;
    patch.first_frame = first;
    patch.frames_stitched = params.frames_per_patch;
    patch.t_first = frame_times[first];
    patch.t_last = frame_times[first + params.frames_per_patch - 1];
    patch.t_mid = 0.5 * (patch.t_first + patch.t_last);
    patch.footprint = params.footprint;
    const RigidTransform T_vehicle_world = invert(pose_at(traj, patch.t_mid).pose);
    for (const auto& p : map.points) {
      const Vec3 v = T_vehicle_world(p.position);
      if (params.footprint.contains(v.x(), v.y())) patch.points.push_back(p);
    }
    patches.push_back(std::move(patch));
  }
  return patches;
}

std::vector<GroundPatch> segment_patches(const MultiLayerMap& map, const Trajectory& traj,
                                         const PatchParams& params) {
  std::vector<double> times;
  times.reserve(traj.samples.size());
  for (const auto& s : traj.samples) times.push_back(s.t);
  return segment_patches(map, traj, times, params);
}

namespace {

double ratio_angle(int num, int den) {
  if (den == 0) return num > 0 ? std::numbers::pi / 2 : 0.0;
  return std::atan(static_cast<double>(num) / den);
}

}  // namespace

C1C2C3 c1c2c3(int r, int g, int b) {
  return {ratio_angle(r, std::max(g, b)), ratio_angle(g, std::max(r, b)),
          ratio_angle(b, std::max(r, g))};
}

Moments moments(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "moments of an empty list");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  Moments m;
  m.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m.variance = m2 / n;
  if (m.variance < kDegenerateVariance) {
    m.degenerate = true;
    return m;
  }
  const double sd = std::sqrt(m.variance);
  m.skewness = (m3 / n) / (m.variance * sd);
  m.kurtosis = (m4 / n) / (m.variance * m.variance);
  return m;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> out;
    const char* groups[] = {"c1", "c2", "c3", "th", "ndvi"};
    const char* stats[] = {"mean", "var", "skew", "kurt"};
    int i = 0;
    for (const char* g : groups) {
      for (const char* s : stats) out[i++] = std::string(g) + "_" + s;
    }
    out[i] = "rms_az";
    return out;
  }();
  return names;
}

FeatureGroup feature_group(int column) {
  if (column < 0 || column >= kFeatureCount) {
    fail(ErrorCode::kInvalidArgument, "feature column out of range");
  }
  if (column < 12) return FeatureGroup::kColor;
  if (column < 16) return FeatureGroup::kThermal;
  if (column < 20) return FeatureGroup::kNdvi;
  return FeatureGroup::kAccel;
}

const char* feature_group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kColor: return "color";
    case FeatureGroup::kThermal: return "thermal";
    case FeatureGroup::kNdvi: return "ndvi";
    case FeatureGroup::kAccel: return "accel";
  }
  return "unknown";
}

bool FeatureVector::flagged(FeatureGroup g) const {
  switch (g) {
    case FeatureGroup::kColor: return flags.color;
    case FeatureGroup::kThermal: return flags.thermal;
    case FeatureGroup::kNdvi: return flags.ndvi;
    case FeatureGroup::kAccel: return flags.accel;
  }
  return true;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Writes a moment block; returns whether it is degenerate.
bool put_moments(FeatureVector& fv, int offset, std::span<const double> values) {
  if (values.empty()) {
    for (int i = 0; i < 4; ++i) fv.values[offset + i] = kNaN;
    return true;
  }
  const Moments m = moments(values);
  fv.values[offset] = m.mean;
  fv.values[offset + 1] = m.variance;
  fv.values[offset + 2] = m.skewness;
  fv.values[offset + 3] = m.kurtosis;
  return m.degenerate;
}

void put_accel(FeatureVector& fv, const std::optional<AccelWindow>& accel) {
  if (accel && !accel->samples.empty()) {
    fv.values[20] = rms(*accel);
    fv.flags.accel = false;
  } else {
    fv.values[20] = kNaN;
    fv.flags.accel = true;
  }
}

}  // namespace

FeatureVector patch_features(const GroundPatch& patch,
                             const std::optional<AccelWindow>& accel) {
  if (patch.points.empty()) fail(ErrorCode::kEmptyPatch, "patch has no points");
  const std::size_t n = patch.points.size();
  std::vector<double> c1(n), c2(n), c3(n), th, nd;
  for (std::size_t i = 0; i < n; ++i) {
    const MapPoint& p = patch.points[i];
    const C1C2C3 c = c1c2c3(p.rgb[0], p.rgb[1], p.rgb[2]);
    c1[i] = c.c1;
    c2[i] = c.c2;
    c3[i] = c.c3;
    if (p.thermal) th.push_back(*p.thermal);
    if (p.ndvi) nd.push_back(*p.ndvi);
  }
  FeatureVector fv;
  fv.t_mid = patch.t_mid;
  const bool d1 = put_moments(fv, 0, c1);
  const bool d2 = put_moments(fv, 4, c2);
  const bool d3 = put_moments(fv, 8, c3);
  fv.flags.color = d1 || d2 || d3;
  fv.flags.thermal = put_moments(fv, 12, th);
  fv.flags.ndvi = put_moments(fv, 16, nd);
  put_accel(fv, accel);
  return fv;
}

FeatureVector empty_patch_features(double t_mid, const std::optional<AccelWindow>& accel) {
  FeatureVector fv;
  fv.t_mid = t_mid;
  for (int i = 0; i < 20; ++i) fv.values[i] = kNaN;
  fv.flags.color = fv.flags.thermal = fv.flags.ndvi = true;
  put_accel(fv, accel);
  return fv;
}

}  // namespace terrafuse
