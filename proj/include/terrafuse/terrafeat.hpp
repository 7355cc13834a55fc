#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "terrafuse/fusionmap.hpp"
#include "terrafuse/imuproc.hpp"
#include "terrafuse/motion.hpp"

namespace terrafuse {

// Rectangle in the vehicle frame (x forward, y left; origin under the front
// axle). The default spans 0.85 m behind the axle and 0.70 m across.
struct Footprint {
  double x_min = -0.85;
  double x_max = 0.0;
  double y_min = -0.35;
  double y_max = 0.35;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
  void validate() const;
};

struct GroundPatch {
  double t_mid = 0.0;    // s, midpoint of the first and last frame times
  double t_first = 0.0;  // s
  double t_last = 0.0;   // s
  Footprint footprint;
  std::vector<MapPoint> points;
  int frames_stitched = 0;
  int first_frame = 0;
};

struct PatchParams {
  Footprint footprint;
  int frames_per_patch = 4;
  int stride = 0;  // frames between patch starts; 0 means frames_per_patch
};

// Groups frames [s*i, s*i + frames_per_patch) and keeps the map points that
// fall inside the footprint at the vehicle pose of the group's t_mid.
std::vector<GroundPatch> segment_patches(const MultiLayerMap& map, const Trajectory& traj,
                                         std::span<const double> frame_times,
                                         const PatchParams& params = {});
// Uses the trajectory sample times as frame times.
std::vector<GroundPatch> segment_patches(const MultiLayerMap& map, const Trajectory& traj,
                                         const PatchParams& params = {});

struct C1C2C3 {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;  // rad, in [0, pi/2]
};
C1C2C3 c1c2c3(int r, int g, int b);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // not excess: a normal distribution gives 3
  bool degenerate = false;  // variance below kDegenerateVariance
};

inline constexpr double kDegenerateVariance = 1e-12;

// Population (1/N) moments.
Moments moments(std::span<const double> values);

inline constexpr int kFeatureCount = 21;

enum class FeatureGroup { kColor, kThermal, kNdvi, kAccel };

struct DegenerateFlags {
  bool color = false;
  bool thermal = false;
  bool ndvi = false;
  bool accel = false;

  bool operator==(const DegenerateFlags&) const = default;
};

struct FeatureVector {
  double t_mid = 0.0;
  // c1, c2, c3, thermal, ndvi moment blocks (mean, var, skew, kurt), rms_az.
  std::array<double, kFeatureCount> values{};
  DegenerateFlags flags;

  bool flagged(FeatureGroup g) const;
};

const std::array<std::string, kFeatureCount>& feature_names();
FeatureGroup feature_group(int column);
const char* feature_group_name(FeatureGroup g);

// Moments of c1c2c3 colors, thermal counts and NDVI over the patch points
// carrying each layer, plus the RMS of the acceleration window. Groups with
// no data hold NaN and are flagged; zero-variance groups are flagged too.
FeatureVector patch_features(const GroundPatch& patch,
                             const std::optional<AccelWindow>& accel);

// Row for a patch without map points: exteroceptive groups NaN and flagged.
FeatureVector empty_patch_features(double t_mid, const std::optional<AccelWindow>& accel);

}  // namespace terrafuse
