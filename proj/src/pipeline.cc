#include <cmath>

#include "terrafuse/error.hpp"
#include "terrafuse/exports.hpp"
#include "terrafuse/pipeline.hpp"
#include "terrafuse/plot.hpp"

namespace terrafuse {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const fs::path& file) {
  const fs::path dir = file.parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string());
}

}  // namespace

std::vector<FeatureVector> compute_features(const MultiLayerMap& map, const Trajectory& traj,
                                            std::span<const double> frame_times,
                                            std::span<const ImuSample> imu,
                                            const PipelineConfig& config) {
  std::vector<FeatureVector> rows;
  for (const GroundPatch& patch : segment_patches(map, traj, frame_times, config.patch)) {
    std::optional<AccelWindow> accel;
    if (patch.t_first < patch.t_last && !imu.empty()) {
      try {
        accel = window_for_interval(imu, patch.t_first, patch.t_last, config.gravity);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyWindow) throw;
      }
    }
    rows.push_back(patch.points.empty() ? empty_patch_features(patch.t_mid, accel)
                                        : patch_features(patch, accel));
  }
  return rows;
}

FeaturesResult run_features(const fs::path& dataset, const std::optional<fs::path>& fused_dir,
                            const PipelineConfig& config, const fs::path& out_csv) {
  config.validate();
  const SensorLog log = load_dataset(dataset);
  FeaturesResult result;
  ensure_parent(out_csv);
  if (log.stereo.empty()) {
    result.warnings.push_back("dataset has no stereo frames; no patches");
  } else {
    MultiLayerMap map;
    Trajectory traj;
    if (fused_dir) {
      map = read_ply(*fused_dir / "map.ply");
      traj = read_trajectory_csv(*fused_dir / "trajectory.csv");
    } else {
      FuseResult fused = fuse_dataset(log, config);
      map = std::move(fused.map);
      traj = std::move(fused.trajectory);
      result.warnings = std::move(fused.warnings);
    }
    if (map.empty()) fail(ErrorCode::kEmptyMap, "fused map has no points");
    if (log.imu.empty()) result.warnings.push_back("dataset has no IMU stream; rms_az is nan");
    std::vector<double> times;
    for (const StereoRecord& s : log.stereo) times.push_back(s.t);
    result.rows = compute_features(map, traj, times, log.imu, config);
  }
  export_features_csv(result.rows, out_csv);
  if (!out_csv.parent_path().empty()) echo_config(config, out_csv.parent_path());
  return result;
}

DetectResult run_detect(const fs::path& features_csv, const PipelineConfig& config,
                        const fs::path& out_csv, const std::optional<fs::path>& plot_dir) {
  config.validate();
  DetectResult result;
  result.rows = read_features_csv(features_csv);
  result.events = detect_changes(result.rows, config.cusum);
  ensure_parent(out_csv);
  export_events_csv(result.events, out_csv);
  if (!out_csv.parent_path().empty()) echo_config(config, out_csv.parent_path());

  if (plot_dir) {
    std::error_code ec;
    fs::create_directories(*plot_dir, ec);
    if (ec) fail(ErrorCode::kIoError, "cannot create " + plot_dir->string());
    const auto& names = feature_names();
    for (int col = 0; col < kFeatureCount; ++col) {
      std::vector<double> t, v, alarms;
      for (const FeatureVector& row : result.rows) {
        t.push_back(row.t_mid);
        v.push_back(row.flagged(feature_group(col)) ? std::nan("") : row.values[col]);
      }
      for (const ChangeEvent& e : result.events) {
        if (e.feature == names[col]) alarms.push_back(e.t);
      }
      write_png(plot_series(t, v, alarms), *plot_dir / (names[col] + ".png"));
    }
  }
  return result;
}

void run_export(const fs::path& map_ply, const fs::path& out_dir, double pixel_size) {
  const MultiLayerMap map = read_ply(map_ply);
  if (map.empty()) fail(ErrorCode::kEmptyMap, map_ply.string() + " has no points");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + out_dir.string());
  write_png(render_top_view(map, MapLayer::kRgb, pixel_size), out_dir / "rgb.png");
  write_png(render_top_view(map, MapLayer::kThermal, pixel_size), out_dir / "thermal.png");
  write_png(render_top_view(map, MapLayer::kNdvi, pixel_size), out_dir / "ndvi.png");
}

}  // namespace terrafuse
