#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "terrafuse/error.hpp"
#include "terrafuse/exports.hpp"
#include "terrafuse/parallel.hpp"
#include "terrafuse/pipeline.hpp"

namespace terrafuse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string frame_context(int index, double t) {
  std::ostringstream os;
  os << "frame " << index << " (t = " << t << " s): ";
  return os.str();
}

}  // namespace

StageTimings& StageTimings::operator+=(const StageTimings& o) {
  load += o.load;
  rectify += o.rectify;
  sgm += o.sgm;
  triangulate += o.triangulate;
  filter += o.filter;
  voxel += o.voxel;
  layers += o.layers;
  merge += o.merge;
  return *this;
}

FrameOutput process_frame(const FrameBundle& bundle, const Rectifier& rectifier,
                          const PipelineConfig& config, const RigidTransform& T_world_vehicle,
                          const DisparityMap* disparity) {
  FrameOutput out;
  out.stats.index = bundle.index;
  out.stats.t = bundle.t;
  out.stats.pose_extrapolated = bundle.pose_extrapolated;
  Stopwatch clock;
  const CalibrationSet& rect = rectifier.rectified_calib();

  ImageBuffer left;
  ImageBuffer right;
  if (rectifier.is_identity()) {
    left = bundle.left;
    right = bundle.right;
  } else {
    RectifiedPair pair = rectifier.apply(bundle.left, bundle.right);
    left = std::move(pair.left);
    right = std::move(pair.right);
  }
  out.timings.rectify = clock.lap();

  DisparityMap disp;
  if (disparity) {
    disp = *disparity;
  } else {
    const ImageBuffer gl = left.channels == 1 ? left : to_gray(left);
    const ImageBuffer gr = right.channels == 1 ? right : to_gray(right);
    disp = sgm_match(gl, gr, config.sgm).left;
  }
  out.stats.disparity_valid = disp.valid_count();
  out.timings.sgm = clock.lap();

  PointCloud cloud = triangulate(disp, rect, left, config.d_min, bundle.index);
  out.stats.triangulated = cloud.points.size();
  out.timings.triangulate = clock.lap();

  if (config.filter_enabled) {
    OutlierFilterResult f = statistical_outlier_filter(cloud, config.filter);
    out.stats.filtered_out = f.removed;
    cloud = std::move(f.cloud);
  }
  out.timings.filter = clock.lap();
  if (config.voxel > 0.0) cloud = voxel_downsample(cloud, config.voxel);
  out.stats.points = cloud.points.size();
  out.timings.voxel = clock.lap();

  const RigidTransform T_world_left = compose(T_world_vehicle, rect.T_vehicle_left);
  out.points = to_world(cloud, T_world_left);
  if (bundle.thermal) {
    out.stats.has_thermal = true;
    out.stats.thermal_hits = attach_thermal(out.points, *bundle.thermal, rect, T_world_left);
  }
  if (bundle.visnir) {
    out.stats.has_visnir = true;
    out.stats.spectra_hits = attach_spectra(out.points, *bundle.visnir, rect, T_world_left,
                                            bundle.index, config.spectra_max_px);
  }
  out.timings.layers = clock.lap();
  return out;
}

Trajectory visual_odometry(const SensorLog& log, const CalibrationSet& rect,
                           const PipelineConfig& config) {
  Trajectory traj;
  if (log.stereo.empty()) return traj;
  std::map<double, const TrackRecord*> by_time;
  for (const TrackRecord& r : log.tracks) by_time[r.t] = &r;
  auto tracks_at = [&](std::size_t k) -> const std::vector<LandmarkObservation>& {
    const auto it = by_time.find(log.stereo[k].t);
    if (it == by_time.end()) {
      fail(ErrorCode::kInsufficientData,
           frame_context(static_cast<int>(k), log.stereo[k].t) + "no landmark tracks for VO");
    }
    return it->second->observations;
  };
  const PinholeCamera& cam = rect.left_cam;
  const double fb = cam.fx * rect.baseline;
  auto lift = [&](const LandmarkObservation& o) {
    const double z = fb / o.disparity;
    return Vec3((o.u - cam.cx) * z / cam.fx, (o.v - cam.cy) * z / cam.fy, z);
  };

  RigidTransform T_world_vehicle;
  if (!log.poses.samples.empty()) T_world_vehicle = pose_at(log.poses, log.stereo[0].t).pose;
  RigidTransform T_world_left = compose(T_world_vehicle, rect.T_vehicle_left);
  const RigidTransform T_left_vehicle = invert(rect.T_vehicle_left);
  traj.samples.push_back({log.stereo[0].t, T_world_vehicle});

  for (std::size_t k = 1; k < log.stereo.size(); ++k) {
    std::map<int, const LandmarkObservation*> prev;
    for (const auto& o : tracks_at(k - 1)) {
      if (o.disparity > 0.0) prev[o.id] = &o;
    }
    std::vector<Correspondence3D> corrs;
    for (const auto& o : tracks_at(k)) {
      const auto it = prev.find(o.id);
      if (it == prev.end() || !(o.disparity > 0.0)) continue;
      corrs.push_back({lift(*it->second), lift(o)});
    }
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    MotionEstimate m;
    try {
      m = estimate_motion(corrs, config.ransac, rng);
    } catch (const Error& e) {
      throw Error(e.code(), frame_context(static_cast<int>(k), log.stereo[k].t) + e.detail());
    }
    T_world_left = compose(T_world_left, invert(m.T_curr_prev));
    traj.samples.push_back({log.stereo[k].t, compose(T_world_left, T_left_vehicle)});
  }
  return traj;
}

Trajectory frame_trajectory(const SensorLog& log, const CalibrationSet& rect,
                            const PipelineConfig& config) {
  if (config.vo) return visual_odometry(log, rect, config);
  Trajectory traj;
  if (log.stereo.empty()) return traj;
  if (log.poses.samples.empty()) {
    fail(ErrorCode::kEmptyTrajectory, "dataset has no pose records; enable visual odometry");
  }
  for (const StereoRecord& s : log.stereo) traj.samples.push_back({s.t, pose_at(log.poses, s.t).pose});
  return traj;
}

FuseResult fuse_dataset(const SensorLog& log, const PipelineConfig& config) {
  config.validate();
  FuseResult result;
  result.map.cell_size = config.map_cell;
  if (log.stereo.empty()) {
    result.warnings.push_back("dataset has no stereo frames; map is empty");
    return result;
  }
  if (log.thermal.empty()) result.warnings.push_back("dataset has no thermal stream; thermal layer is nan");
  if (log.visnir.empty()) result.warnings.push_back("dataset has no VIS-NIR stream; ndvi layer is nan");

  const Rectifier rectifier(log.calib);
  result.trajectory = frame_trajectory(log, rectifier.rectified_calib(), config);

  const int n = static_cast<int>(log.stereo.size());
  const int chunk = std::max(1, config.jobs) * 2;
  for (int base = 0; base < n; base += chunk) {
    const int m = std::min(chunk, n - base);
    std::vector<FrameOutput> outs(m);
    parallel_for(m, config.jobs, [&](int i) {
      const int index = base + i;
      try {
        Stopwatch clock;
        const FrameBundle bundle = bundle_at_index(log, index, config.sync);
        const double load = clock.lap();
        outs[i] = process_frame(bundle, rectifier, config,
                                result.trajectory.samples[index].T_world_vehicle);
        outs[i].timings.load = load;
      } catch (const Error& e) {
        throw Error(e.code(), frame_context(index, log.stereo[index].t) + e.detail());
      }
    });
    for (FrameOutput& o : outs) {
      Stopwatch clock;
      merge_points(result.map, o.points);
      o.timings.merge = clock.lap();
      result.timings += o.timings;
      result.frames.push_back(o.stats);
    }
  }
  std::size_t extrapolated = 0;
  for (const FrameStats& s : result.frames) extrapolated += s.pose_extrapolated;
  if (extrapolated > 0 && !config.vo) {
    result.warnings.push_back(std::to_string(extrapolated) +
                              " frames fall outside the pose log; poses clamped");
  }
  return result;
}

json timings_json(const StageTimings& t) {
  return {{"load", t.load},     {"rectify", t.rectify}, {"sgm", t.sgm},
          {"triangulate", t.triangulate}, {"filter", t.filter}, {"voxel", t.voxel},
          {"layers", t.layers}, {"merge", t.merge}};
}

json fuse_report(const FuseResult& r) {
  std::size_t thermal = 0, ndvi = 0, spectra = 0;
  for (const MapPoint& p : r.map.points) {
    thermal += p.thermal.has_value();
    ndvi += p.ndvi.has_value();
    spectra += p.spectrum_ref.has_value();
  }
  json frames = json::array();
  for (const FrameStats& s : r.frames) {
    frames.push_back({{"index", s.index},
                      {"t", s.t},
                      {"disparity_valid", s.disparity_valid},
                      {"triangulated", s.triangulated},
                      {"filtered_out", s.filtered_out},
                      {"points", s.points},
                      {"thermal_hits", s.thermal_hits},
                      {"spectra_hits", s.spectra_hits},
                      {"thermal", s.has_thermal},
                      {"visnir", s.has_visnir}});
  }
  return {{"frame_count", r.frames.size()},
          {"point_count", r.map.points.size()},
          {"layers", {{"thermal", thermal}, {"ndvi", ndvi}, {"spectrum_ref", spectra}}},
          {"warnings", r.warnings},
          {"frames", frames}};
}

void write_trajectory_csv(const Trajectory& traj, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "t,x,y,z,qw,qx,qy,qz\n";
  for (const auto& s : traj.samples) {
    const Vec3& p = s.T_world_vehicle.translation;
    out << format_real(s.t) << ',' << format_real(p.x()) << ',' << format_real(p.y()) << ','
        << format_real(p.z());
    for (double c : s.T_world_vehicle.rotation.coeffs()) out << ',' << format_real(c);
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
}

Trajectory read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot read " + path.string());
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    try {
      while (std::getline(ss, tok, ',')) v.push_back(parse_real(tok));
      if (v.size() != 8) throw Error(ErrorCode::kParseError, "expected 8 fields");
      traj.samples.push_back({v[0], {UnitQuaternion(v[4], v[5], v[6], v[7]), Vec3(v[1], v[2], v[3])}});
    } catch (const Error& e) {
      fail(ErrorCode::kParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.detail());
    }
  }
  traj.validate();
  return traj;
}

FuseResult run_fuse(const fs::path& dataset, const PipelineConfig& config, const fs::path& out_dir) {
  const SensorLog log = load_dataset(dataset);
  FuseResult result = fuse_dataset(log, config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + out_dir.string());
  echo_config(config, out_dir);
  if (result.map.empty()) {
    fail(ErrorCode::kEmptyMap, "no points survived fusion; nothing to write");
  }
  export_ply(result.map, out_dir / "map.ply");
  write_trajectory_csv(result.trajectory, out_dir / "trajectory.csv");
  std::ofstream rep(out_dir / "report.json", std::ios::binary);
  rep << fuse_report(result).dump(2) << '\n';
  std::ofstream tim(out_dir / "timings.json", std::ios::binary);
  tim << timings_json(result.timings).dump(2) << '\n';
  if (!rep || !tim) fail(ErrorCode::kIoError, "cannot write report files in " + out_dir.string());
  return result;
}

}  // namespace terrafuse
