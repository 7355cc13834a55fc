#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "terrafuse/cusum.hpp"
#include "terrafuse/error.hpp"
#include "terrafuse/dataset.hpp"
#include "terrafuse/fusionmap.hpp"
#include "terrafuse/imuproc.hpp"
#include "terrafuse/motion.hpp"
#include "terrafuse/pointcloud.hpp"
#include "terrafuse/stereo.hpp"
#include "terrafuse/terrafeat.hpp"

namespace terrafuse {

struct PipelineConfig {
  SgmParams sgm{32, 10, 120, 8, true, 1.0};
  double d_min = 1.0;  // px, smaller disparities are not triangulated
  bool filter_enabled = true;
  OutlierFilterParams filter;
  double voxel = 0.02;     // m, per-frame downsampling
  double map_cell = 0.02;  // m, box grid merge
  double spectra_max_px = 1.0;
  PatchParams patch;
  CusumParams cusum;
  SyncTolerance sync;
  bool vo = false;  // estimate poses from landmark tracks
  RansacParams ransac;
  std::uint64_t seed = 1;
  double gravity = kGravity;
  int jobs = 1;  // not part of the echoed config: results never depend on it

  // Throws invalid-argument naming the offending field.
  void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& config);
// Keys missing from the document keep the values in `base`; unknown keys
// are rejected with bad-schema.
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path);
// Writes config.json into an output directory.
void echo_config(const PipelineConfig& config, const std::filesystem::path& dir);

// Process exit status for an error: 2 for input and configuration
// problems, 1 for everything else.
int exit_status(ErrorCode code);

struct StageTimings {
  double load = 0.0, rectify = 0.0, sgm = 0.0, triangulate = 0.0, filter = 0.0, voxel = 0.0,
         layers = 0.0, merge = 0.0;  // s
  StageTimings& operator+=(const StageTimings& o);
};

struct FrameStats {
  int index = 0;
  double t = 0.0;
  std::size_t disparity_valid = 0;
  std::size_t triangulated = 0;
  std::size_t filtered_out = 0;
  std::size_t points = 0;  // after voxel downsampling
  std::size_t thermal_hits = 0;
  std::size_t spectra_hits = 0;
  bool has_thermal = false;
  bool has_visnir = false;
  bool pose_extrapolated = false;
};

struct FrameOutput {
  std::vector<MapPoint> points;  // world frame, layers attached
  FrameStats stats;
  StageTimings timings;
};

// Dense per-frame stage: rectify, SGM, triangulate, filter, voxel, move to
// the world frame and attach the thermal and VIS-NIR layers. A supplied
// disparity map (in the rectified left image) replaces rectification and
// SGM.
FrameOutput process_frame(const FrameBundle& bundle, const Rectifier& rectifier,
                          const PipelineConfig& config, const RigidTransform& T_world_vehicle,
                          const DisparityMap* disparity = nullptr);

// Vehicle poses at the stereo times from landmark tracks, anchored at the
// logged pose of frame 0 when there is one.
Trajectory visual_odometry(const SensorLog& log, const CalibrationSet& rectified_calib,
                           const PipelineConfig& config);

// Vehicle poses at the stereo times: VO when enabled, otherwise the logged
// poses. Throws empty-trajectory when neither is available.
Trajectory frame_trajectory(const SensorLog& log, const CalibrationSet& rectified_calib,
                            const PipelineConfig& config);

struct FuseResult {
  MultiLayerMap map;
  Trajectory trajectory;  // vehicle poses used, one per stereo frame
  std::vector<FrameStats> frames;
  std::vector<std::string> warnings;
  StageTimings timings;
};

// Whole dataset into one map; frames run on config.jobs threads and merge
// in index order.
FuseResult fuse_dataset(const SensorLog& log, const PipelineConfig& config);

// Deterministic run report (no timings).
nlohmann::json fuse_report(const FuseResult& result);
nlohmann::json timings_json(const StageTimings& t);

// Writes map.ply, trajectory.csv, report.json, timings.json and config.json.
FuseResult run_fuse(const std::filesystem::path& dataset, const PipelineConfig& config,
                    const std::filesystem::path& out_dir);

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

// One feature row per ground patch; the patch's acceleration window is
// [t_first, t_last).
std::vector<FeatureVector> compute_features(const MultiLayerMap& map, const Trajectory& traj,
                                            std::span<const double> frame_times,
                                            std::span<const ImuSample> imu,
                                            const PipelineConfig& config);

struct FeaturesResult {
  std::vector<FeatureVector> rows;
  std::vector<std::string> warnings;
};

// From a dataset, optionally reusing a fused map directory (map.ply plus
// trajectory.csv); otherwise the dataset is fused in memory first.
FeaturesResult run_features(const std::filesystem::path& dataset,
                            const std::optional<std::filesystem::path>& fused_dir,
                            const PipelineConfig& config, const std::filesystem::path& out_csv);

struct DetectResult {
  std::vector<FeatureVector> rows;
  std::vector<ChangeEvent> events;
};

// Events CSV and, when plot_dir is set, one PNG time series per feature.
DetectResult run_detect(const std::filesystem::path& features_csv, const PipelineConfig& config,
                        const std::filesystem::path& out_csv,
                        const std::optional<std::filesystem::path>& plot_dir);

// Top-view PNGs of the map layers: rgb.png, thermal.png, ndvi.png.
void run_export(const std::filesystem::path& map_ply, const std::filesystem::path& out_dir,
                double pixel_size);

}  // namespace terrafuse
