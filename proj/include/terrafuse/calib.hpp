#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "terrafuse/geomcore.hpp"

namespace terrafuse {

inline constexpr const char* kCalibFormat = "terrafuse-calib/1";

// VIS-NIR scan line as seen in the rectified left image: v = slope * u +
// intercept. The band table describes the spectra recorded along it.
struct ScanLine {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> band_centers;  // nm, strictly increasing
  int band_count = 0;

  // Checks the band table and that the line crosses the given image.
  void validate(int image_width, int image_height) const;
  double v_at(double u) const { return slope * u + intercept; }

  bool operator==(const ScanLine&) const = default;
};

struct CalibrationSet {
  PinholeCamera left_cam;
  PinholeCamera right_cam;
  PinholeCamera thermal_cam;
  RigidTransform T_right_left;    // left camera -> right camera
  RigidTransform T_vehicle_left;  // left camera -> vehicle
  RigidTransform T_left_thermal;  // thermal camera -> left camera
  ScanLine scanline;
  double baseline = 0.0;  // m

  void validate() const;

  bool operator==(const CalibrationSet&) const = default;
};

nlohmann::json calibration_to_json(const CalibrationSet& calib);
CalibrationSet calibration_from_json(const nlohmann::json& doc);
void save_calibration(const CalibrationSet& calib,
                      const std::filesystem::path& path);
CalibrationSet load_calibration(const std::filesystem::path& path);

nlohmann::json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& doc);

struct PatternObservation {
  Vec3 pattern_point;  // m, pattern frame
  Vec2 pixel;          // px, distorted image
};

struct PoseRefineOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

struct PoseEstimate {
  RigidTransform T_cam_pattern;
  double rms_px = 0.0;
  int iterations = 0;
  // Sum of squared residuals after initialization and after every accepted
  // step.
  std::vector<double> cost_history;
};

// Camera pose relative to a calibration pattern by Levenberg-damped
// Gauss-Newton on the reprojection error. Needs at least 6 observations;
// planar patterns are initialized from a homography, others from a DLT.
PoseEstimate estimate_pose(std::span<const PatternObservation> observations,
                           const PinholeCamera& cam,
                           const PoseRefineOptions& options = {});

// T_a_b from two poses estimated against the same pattern placement.
RigidTransform chain_extrinsics(const RigidTransform& T_a_pattern,
                                const RigidTransform& T_b_pattern);

// Multi-view variant: per-view chaining, then sign-aligned quaternion mean
// and translation mean.
RigidTransform chain_extrinsics(std::span<const RigidTransform> T_a_patterns,
                                std::span<const RigidTransform> T_b_patterns);

RigidTransform average_transforms(std::span<const RigidTransform> transforms);

struct ScanLineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;  // perpendicular, px
};

// Total-least-squares line through lamp detections in the left image.
ScanLineFit fit_scanline(std::span<const Vec2> points);

}  // namespace terrafuse
