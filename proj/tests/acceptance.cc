// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance [criterion ...]; with no arguments all nine run.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "terrafuse/calib.hpp"
#include "terrafuse/cusum.hpp"
#include "terrafuse/imuproc.hpp"
#include "terrafuse/pipeline.hpp"
#include "terrafuse/spectral.hpp"
#include "terrafuse/synthgen.hpp"
#include "terrafuse/terrafeat.hpp"

namespace fs = std::filesystem;
using namespace terrafuse;

namespace {

// Criterion 1
constexpr double kRmsRelTol = 0.10;
constexpr std::size_t kMinReadings = 50;
constexpr double kRmsRuntime = 5.0;  // s
// Criterion 2
constexpr int kChangeSeeds = 20;
constexpr double kChangeAt = 10.0;
constexpr double kDetectBy = 12.0;
constexpr double kQuietUntil = 9.0;
constexpr double kChangeDuration = 13.0;  // s simulated; the window closes at 12 s
constexpr double kChangeRuntime = 10.0;   // s per seed
// Pinned detector. Chosen on seeds 101-120, evaluated on seeds 1-20.
constexpr CusumParams kAcceptanceCusum{0.5, 15.0, 10, false};
// Criterion 3
constexpr double kGrassNdvi = 0.40;
constexpr double kGrassNdviTol = 0.05;
// Criterion 4
constexpr double kDepthRelTol = 0.01;
constexpr double kDepthAbsTol = 0.02;  // m
constexpr double kRoundTripTol = 1e-6;  // m
// Criterion 5
constexpr double kThermalShare = 0.99;
constexpr double kThermalExact = 1e-9;  // counts
// Criterion 6
constexpr double kPoseTol = 1e-6;   // m and rad
constexpr double kChainTol = 1e-9;  // m and rad
// Criterion 7
constexpr int kVoFrames = 100;
constexpr double kVoNoiselessTol = 1e-6;  // m
constexpr double kVoOutlierTol = 1e-3;    // m
constexpr double kVoOutlierShare = 0.20;
// Criterion 8
constexpr double kMomentTol = 1e-12;
constexpr double kGravityTol = 1e-9;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Low-resolution rig for the timed runs: rendering and the dense stages
// stay cheap while the geometry matches the default rig.
WorldSpec reduced(WorldSpec s) {
  s.rig.width = 80;
  s.rig.height = 60;
  s.rig.focal = 80;
  s.rig.thermal_width = 40;
  s.rig.thermal_height = 30;
  s.rig.thermal_focal = 38;
  return s;
}

// With exact disparity there are no stereo outliers for the filter to find.
PipelineConfig fast_config() {
  PipelineConfig c;
  c.filter_enabled = false;
  c.cusum = kAcceptanceCusum;
  return c;
}

struct Run {
  std::vector<double> times;
  Trajectory traj;
  MultiLayerMap map;
  std::vector<ImuSample> imu;
  std::vector<FeatureVector> rows;
  double seconds = 0.0;
};

// Generator to features in memory, the generator's exact disparity standing
// in for SGM.
Run fast_run(const World& world, const PipelineConfig& config) {
  const auto t0 = Clock::now();
  Run r;
  const Rectifier rectifier(world.calibration());
  r.times = stream_times(world.spec().rates.stereo, world.duration());
  r.map.cell_size = config.map_cell;
  for (int k = 0; k < static_cast<int>(r.times.size()); ++k) {
    const double t = r.times[k];
    RenderedStereo st = render_stereo(world, t, k, false);
    FrameBundle b;
    b.index = k;
    b.t = t;
    b.left = std::move(st.left);
    b.thermal = render_thermal(world, t, k);
    b.thermal_t = t;
    b.visnir = render_visnir(world, t, k);
    b.visnir_t = t;
    const RigidTransform pose = world.vehicle_pose(t);
    r.traj.samples.push_back({t, pose});
    const FrameOutput out = process_frame(b, rectifier, config, pose, &st.truth.disparity);
    merge_points(r.map, out.points);
  }
  r.imu = generate_imu(world);
  r.rows = compute_features(r.map, r.traj, r.times, r.imu, config);
  r.seconds = since(t0);
  return r;
}

// Material under [x0, x1] or -1 when a boundary lies inside.
int pure_material(const World& world, double x0, double x1) {
  const int m = world.ground_material_at(x0);
  return world.ground_material_at(x1) == m ? m : -1;
}

double front_x(const World& world, double t) {
  return world.vehicle_pose(t).translation.x();
}

// Criteria 1 and 3 share one three-surface run.
struct ThreeSurface {
  World world{reduced(scenario("three-surface")), 1};
  Run run;
  std::vector<GroundPatch> patches;
};

ThreeSurface& three_surface() {
  static ThreeSurface* s = [] {
    auto* p = new ThreeSurface;
    const PipelineConfig c = fast_config();
    p->run = fast_run(p->world, c);
    p->patches = segment_patches(p->run.map, p->run.traj, p->run.times, c.patch);
    return p;
  }();
  return *s;
}

Outcome criterion_rms() {
  ThreeSurface& s = three_surface();
  Outcome o;
  std::map<int, std::vector<double>> by_material;
  int checked = 0, within = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < s.patches.size(); ++i) {
    const GroundPatch& p = s.patches[i];
    const double rms = s.run.rows[i].values[20];
    if (!std::isfinite(rms)) continue;
    const std::size_t readings = window_for_interval(s.run.imu, p.t_first, p.t_last).samples.size();
    const int m = pure_material(s.world, front_x(s.world, p.t_first), front_x(s.world, p.t_last));
    if (readings < kMinReadings || m < 0) continue;
    const double target = s.world.material(m).rms_az_target;
    const double rel = std::abs(rms - target) / target;
    worst = std::max(worst, rel);
    ++checked;
    within += rel <= kRmsRelTol;
    by_material[m].push_back(rms);
  }
  auto mean_of = [&](const char* name) {
    const int m = static_cast<int>(&s.world.spec().material(name) - s.world.spec().materials.data());
    const auto& v = by_material[m];
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? std::nan("") : sum / static_cast<double>(v.size());
  };
  const double g = mean_of("grass"), pl = mean_of("ploughed"), pv = mean_of("paved");
  const bool ordered = g < pl && pl < pv;
  o.pass = checked > 0 && within == checked && ordered && s.run.seconds < kRmsRuntime;
  o.detail = fmt("%d/%d patches within %.0f%% (worst %.2e); means %.4f < %.4f < %.4f; %.2f s",
                 within, checked, 100 * kRmsRelTol, worst, g, pl, pv, s.run.seconds);
  return o;
}

Outcome criterion_change() {
  Outcome o;
  WorldSpec spec = reduced(scenario("grass-paved"));
  spec.duration = kChangeDuration;
  const PipelineConfig c = fast_config();
  const auto& names = feature_names();
  int clean = 0, early_runs = 0;
  double slowest = 0.0, total = 0.0;
  std::string misses;
  for (int seed = 1; seed <= kChangeSeeds; ++seed) {
    const auto t0 = Clock::now();
    const Run r = fast_run(World(spec, seed), c);
    const auto events = detect_changes(r.rows, c.cusum);
    const double secs = since(t0);
    slowest = std::max(slowest, secs);
    total += secs;
    bool early = false;
    std::set<FeatureGroup> hit;
    for (const ChangeEvent& e : events) {
      if (e.t < kQuietUntil) early = true;
      const int col = static_cast<int>(std::find(names.begin(), names.end(), e.feature) - names.begin());
      if (e.t >= kChangeAt && e.t <= kDetectBy) hit.insert(feature_group(col));
    }
    early_runs += early;
    const bool all = hit.size() == 4;
    if (!early && all) {
      ++clean;
    } else {
      misses += fmt(" seed %d%s%s", seed, early ? " early" : "", all ? "" : " missed-group");
    }
  }
  o.pass = clean == kChangeSeeds && slowest < kChangeRuntime;
  o.detail = fmt("%d/%d seeds flag every group in [%.0f, %.0f] s; %d with alarms before %.0f s; "
                 "slowest run %.2f s (all seeds %.1f s); cusum k %.1f h %.0f warmup %d",
                 clean, kChangeSeeds, kChangeAt, kDetectBy, early_runs, kQuietUntil, slowest, total,
                 kAcceptanceCusum.k, kAcceptanceCusum.h, kAcceptanceCusum.warmup) +
             misses;
  return o;
}

Outcome criterion_ndvi() {
  ThreeSurface& s = three_surface();
  Outcome o;
  const Footprint fp = PatchParams{}.footprint;
  std::map<std::string, std::vector<double>> by_material;
  for (std::size_t i = 0; i < s.patches.size(); ++i) {
    const GroundPatch& p = s.patches[i];
    const FeatureVector& row = s.run.rows[i];
    if (row.flags.ndvi && !std::isfinite(row.values[16])) continue;
    const int m = pure_material(s.world, front_x(s.world, p.t_first) + fp.x_min,
                                front_x(s.world, p.t_last) + fp.x_max);
    if (m < 0) continue;
    by_material[s.world.material(m).name].push_back(row.values[16]);
  }
  double grass_sum = 0.0;
  for (double v : by_material["grass"]) grass_sum += v;
  const auto n_grass = by_material["grass"].size();
  const double grass = n_grass ? grass_sum / static_cast<double>(n_grass) : std::nan("");
  double bare_max = -1.0;
  std::size_t n_bare = 0;
  for (const char* name : {"ploughed", "paved"}) {
    for (double v : by_material[name]) {
      bare_max = std::max(bare_max, v);
      ++n_bare;
    }
  }
  const double exact = ndvi(0.8, 0.2);
  o.pass = n_grass > 0 && std::abs(grass - kGrassNdvi) <= kGrassNdviTol && n_bare > 0 &&
           bare_max < 0.0 && exact == 0.6;
  o.detail = fmt("grass mean %.4f over %zu patches; max bare-soil/paved patch %.4f over %zu; "
                 "ndvi(0.8, 0.2) = %.17g",
                 grass, n_grass, bare_max, n_bare, exact);
  return o;
}

Outcome criterion_stereo() {
  Outcome o;
  WorldSpec spec = scenario("uniform-paved");
  for (Material& m : spec.materials) m.roughness = 0.0;
  spec.rig.width = 320;
  spec.rig.height = 240;
  spec.rig.focal = 1000;
  spec.rig.baseline = 0.04;
  spec.rig.pitch_deg = 90.0;
  spec.rig.left_position = Vec3(0.1, 0.02, 2.0);
  spec.rig.scanline_distance = 0.1;
  spec.noise.image_sigma = 0.0;
  const World world(spec, 4);
  const double t = 2.0;
  const RenderedStereo st = render_stereo(world, t, 0);
  const CalibrationSet& calib = world.calibration();

  SgmParams sgm;
  sgm.d_max = 32;
  const DisparityMap disp = sgm_match(to_gray(st.left), to_gray(st.right), sgm).left;
  const PointCloud cloud = triangulate(disp, calib, st.left, 0.0, 0);
  const double fb = calib.left_cam.fx * calib.baseline;
  std::vector<double> err;
  double true_depth = 0.0;
  std::size_t k = 0;
  for (int v = 0; v < disp.height; ++v) {
    for (int u = 0; u < disp.width; ++u) {
      if (!disp.valid(u, v)) continue;
      const double truth = fb / st.truth.disparity.at(u, v);
      true_depth = truth;
      err.push_back(std::abs(cloud.points[k++].position.z() - truth));
    }
  }
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  const double median = err.empty() ? std::nan("") : err[err.size() / 2];
  const double valid = static_cast<double>(err.size()) / (disp.width * disp.height);

  // Exact disparity back to the ray-cast ground points.
  const PointCloud exact = triangulate(st.truth.disparity, calib, st.left, 0.0, 0);
  const RigidTransform T_world_left = world.left_pose(t);
  const Mat3 R = T_world_left.rotation.matrix();
  double round_trip = 0.0;
  std::size_t j = 0;
  for (int v = 0; v < disp.height; ++v) {
    for (int u = 0; u < disp.width; ++u) {
      if (!st.truth.disparity.valid(u, v)) continue;
      const PinholeCamera& cam = calib.left_cam;
      const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const auto hit = world.raycast(T_world_left.translation, R * ray);
      const Vec3 p = T_world_left(exact.points[j++].position);
      round_trip = std::max(round_trip, hit ? (p - hit->point).norm() : INFINITY);
    }
  }
  o.pass = median < kDepthRelTol * true_depth && median < kDepthAbsTol && valid > 0.5 &&
           j > 0 && round_trip < kRoundTripTol;
  o.detail = fmt("median |dZ| %.2e m at %.3f m floor (%.1f%% valid); exact round trip %.2e m",
                 median, true_depth, 100 * valid, round_trip);
  return o;
}

Outcome criterion_thermal() {
  Outcome o;
  WorldSpec spec = reduced(scenario("grass-paved"));
  spec.duration = kChangeDuration;
  spec.noise.texture = false;
  spec.noise.thermal_sigma = 0.0;
  spec.noise.image_sigma = 0.0;
  spec.noise.spectral_sigma = 0.0;
  // Default thermal resolution: registration is what is measured here.
  spec.rig.thermal_width = RigSpec{}.thermal_width;
  spec.rig.thermal_height = RigSpec{}.thermal_height;
  spec.rig.thermal_focal = RigSpec{}.thermal_focal;
  const World world(spec, 2);
  PipelineConfig c = fast_config();
  c.filter_enabled = true;
  const Run r = fast_run(world, c);
  std::size_t visible = 0, exact = 0;
  std::set<int> materials;
  for (const MapPoint& p : r.map.points) {
    if (!p.thermal) continue;
    ++visible;
    const int m = world.ground_material_at(p.position.x());
    materials.insert(m);
    exact += std::abs(*p.thermal - world.material(m).thermal_counts) <= kThermalExact;
  }
  const double share = visible ? static_cast<double>(exact) / visible : 0.0;
  o.pass = share >= kThermalShare && materials.size() == 2;
  o.detail = fmt("%zu of %zu thermal points (%.3f%%) carry their material's count; %zu materials",
                 exact, visible, 100 * share, materials.size());
  return o;
}

Outcome criterion_calibration() {
  Outcome o;
  const World world(scenario("grass-paved"), 3);
  const CalibrationSet& calib = world.calibration();
  std::vector<Vec3> grid;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 5; ++i) grid.emplace_back(0.06 * i, 0.06 * j, 0.0);
  }
  const RigidTransform T_left_pattern{UnitQuaternion::from_rotation_vector(Vec3(0.2, -0.15, 0.05)),
                                      Vec3(-0.12, -0.09, 1.1)};
  const RigidTransform T_thermal_pattern = compose(invert(calib.T_left_thermal), T_left_pattern);
  auto observe = [&](const PinholeCamera& cam, const RigidTransform& T) {
    std::vector<PatternObservation> obs;
    for (const Vec3& p : grid) {
      const auto ip = project(cam, T(p));
      if (ip && ip->in_bounds) obs.push_back({p, Vec2(ip->u, ip->v)});
    }
    return obs;
  };
  const auto left_obs = observe(calib.left_cam, T_left_pattern);
  const auto thermal_obs = observe(calib.thermal_cam, T_thermal_pattern);
  const PoseEstimate left = estimate_pose(left_obs, calib.left_cam);
  const PoseEstimate thermal = estimate_pose(thermal_obs, calib.thermal_cam);
  const double dt = std::max((left.T_cam_pattern.translation - T_left_pattern.translation).norm(),
                             (thermal.T_cam_pattern.translation - T_thermal_pattern.translation).norm());
  const double dr = std::max(angular_distance(left.T_cam_pattern.rotation, T_left_pattern.rotation),
                             angular_distance(thermal.T_cam_pattern.rotation, T_thermal_pattern.rotation));
  const RigidTransform chained = chain_extrinsics(left.T_cam_pattern, thermal.T_cam_pattern);
  const double ct = (chained.translation - calib.T_left_thermal.translation).norm();
  const double cr = angular_distance(chained.rotation, calib.T_left_thermal.rotation);
  o.pass = left_obs.size() == 20 && thermal_obs.size() == 20 && dt < kPoseTol && dr < kPoseTol &&
           ct < kChainTol && cr < kChainTol;
  o.detail = fmt("pose error %.1e m / %.1e rad (%zu + %zu points); thermal-to-stereo offset %.1e m / %.1e rad",
                 dt, dr, left_obs.size(), thermal_obs.size(), ct, cr);
  return o;
}

double vo_drift(double outlier_share) {
  WorldSpec spec = scenario("uniform-grass");
  spec.yaw_rate = 0.02;  // the landmark corridor is 6 m wide
  spec.landmark_count = 2000;
  spec.noise.track_outlier_fraction = outlier_share;
  const World world(spec, 7);
  SensorLog log;
  log.calib = world.calibration();
  const auto times = stream_times(spec.rates.stereo, world.duration());
  for (int k = 0; k <= kVoFrames; ++k) {
    log.stereo.push_back({times[k], {}, {}});
    log.tracks.push_back({times[k], observe_landmarks(world, times[k], k)});
  }
  log.poses.samples.push_back({times[0], world.vehicle_pose(times[0])});
  PipelineConfig c;
  c.vo = true;
  const Trajectory traj = visual_odometry(log, Rectifier(log.calib).rectified_calib(), c);
  double drift = 0.0;
  for (const auto& s : traj.samples) {
    drift = std::max(drift, (s.T_world_vehicle.translation - world.vehicle_pose(s.t).translation).norm());
  }
  return traj.samples.size() == static_cast<std::size_t>(kVoFrames) + 1 ? drift : INFINITY;
}

Outcome criterion_motion() {
  Outcome o;
  const double clean = vo_drift(0.0);
  const double dirty = vo_drift(kVoOutlierShare);
  o.pass = clean < kVoNoiselessTol && dirty < kVoOutlierTol;
  o.detail = fmt("max drift over %d frames: noiseless %.2e m, %.0f%% outliers with RANSAC %.2e m",
                 kVoFrames, clean, 100 * kVoOutlierShare, dirty);
  return o;
}

Outcome criterion_oracles() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::vector<std::string> failed;

  // Moments against long double summation.
  double moment_err = 0.0;
  std::uniform_int_distribution<int> len(2, 200);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x(len(rng));
    const double scale = std::exp(gauss(rng));
    for (double& v : x) v = 3.0 + scale * gauss(rng);
    long double s = 0;
    for (double v : x) s += v;
    const long double mean = s / x.size();
    long double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
      const long double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= x.size();
    m3 /= x.size();
    m4 /= x.size();
    const Moments m = moments(x);
    const long double want[4] = {mean, m2, m3 / std::pow(m2, 1.5L), m4 / (m2 * m2)};
    const double got[4] = {m.mean, m.variance, m.skewness, m.kurtosis};
    for (int q = 0; q < 4; ++q) {
      moment_err = std::max(moment_err, static_cast<double>(std::abs(got[q] - want[q]) /
                                                            std::max(1.0L, std::abs(want[q]))));
    }
  }
  if (!(moment_err < kMomentTol)) failed.push_back("moments");

  // rms(c x) = |c| rms(x).
  double rms_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(len(rng)), y;
    for (double& v : x) v = gauss(rng);
    const double c = 10.0 * gauss(rng);
    for (double v : x) y.push_back(c * v);
    rms_err = std::max(rms_err, std::abs(rms(y) - std::abs(c) * rms(x)) / (std::abs(c) * rms(x)));
  }
  if (!(rms_err < 1e-12)) failed.push_back("rms");

  // c1c2c3 is unchanged by a common gain.
  double c123_err = 0.0;
  std::uniform_int_distribution<int> channel(1, 63);
  for (int i = 0; i < 1000; ++i) {
    const int r = channel(rng), g = channel(rng), b = channel(rng);
    const C1C2C3 a = c1c2c3(r, g, b);
    const C1C2C3 z = c1c2c3(4 * r, 4 * g, 4 * b);
    c123_err = std::max({c123_err, std::abs(a.c1 - z.c1), std::abs(a.c2 - z.c2), std::abs(a.c3 - z.c3)});
  }
  if (!(c123_err < 1e-12)) failed.push_back("c1c2c3");

  // Static readings at random attitudes.
  double gravity_err = 0.0;
  std::uniform_real_distribution<double> angle(0.0, 3.14159);
  for (int i = 0; i < 1000; ++i) {
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    const UnitQuaternion q = UnitQuaternion::from_axis_angle(axis.normalized(), angle(rng));
    const ImuSample s{0.0, quat_rotate(q.inverse(), Vec3(0, 0, -kGravity)), q};
    gravity_err = std::max(gravity_err, gravity_compensate(s).norm());
  }
  if (!(gravity_err < kGravityTol)) failed.push_back("gravity");

  // Null streams: constant and alternating at one standard deviation.
  int null_alarms = 0;
  for (int i = 0; i < 100; ++i) {
    const double level = gauss(rng), spread = std::exp(gauss(rng));
    CusumState constant, alternating;
    for (int n = 0; n < 500; ++n) {
      null_alarms += constant.update(level);
      null_alarms += alternating.update(level + (n % 2 ? spread : -spread));
    }
  }
  if (null_alarms != 0) failed.push_back("cusum-null");

  // Threshold-monotone delay. Per stream for the 5-sigma step; on the mean
  // over a grid of h and step sizes otherwise, since the reference freezes
  // at h/2 and so differs between thresholds on the same stream.
  auto alarm_index = [](const std::vector<double>& x, double h) {
    CusumParams p;
    p.h = h;
    CusumState st(p);
    for (int n = 0; n < static_cast<int>(x.size()); ++n) {
      if (st.update(x[n])) return n;
    }
    return static_cast<int>(x.size());
  };
  int step_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x;
    for (int n = 0; n < 60; ++n) x.push_back(gauss(rng) + (n >= 30 ? 5.0 : 0.0));
    step_violations += alarm_index(x, 10.0) < alarm_index(x, 5.0);
  }
  if (step_violations != 0) failed.push_back("cusum-step");
  const std::vector<double> hs{2.0, 4.0, 6.0, 8.0, 12.0}, shifts{0.75, 1.5, 3.0};
  std::vector<std::vector<double>> mean_delay(shifts.size(), std::vector<double>(hs.size(), 0.0));
  int stream_inversions = 0;
  constexpr int kTrials = 400;
  for (std::size_t si = 0; si < shifts.size(); ++si) {
    for (int trial = 0; trial < kTrials; ++trial) {
      std::vector<double> x;
      for (int n = 0; n < 400; ++n) x.push_back(gauss(rng) + (n >= 50 ? shifts[si] : 0.0));
      int prev = -1;
      for (std::size_t hi = 0; hi < hs.size(); ++hi) {
        const int at = alarm_index(x, hs[hi]);
        stream_inversions += at < prev;
        prev = at;
        mean_delay[si][hi] += (at - 50.0) / kTrials;
      }
    }
  }
  int grid_violations = 0;
  for (std::size_t si = 0; si < shifts.size(); ++si) {
    for (std::size_t hi = 1; hi < hs.size(); ++hi) {
      grid_violations += mean_delay[si][hi] < mean_delay[si][hi - 1];
      if (si > 0) grid_violations += mean_delay[si][hi] > mean_delay[si - 1][hi];
    }
  }
  if (grid_violations != 0) failed.push_back("cusum-delay");

  o.pass = failed.empty();
  o.detail = fmt("moments %.1e, rms %.1e, c1c2c3 %.1e, gravity %.1e, null alarms %d, "
                 "5-sigma h10<h5 %d/1000, grid mean-delay inversions %d "
                 "(single-stream inversions %d of %d)",
                 moment_err, rms_err, c123_err, gravity_err, null_alarms, step_violations,
                 grid_violations, stream_inversions, int(shifts.size() * kTrials * (hs.size() - 1)));
  for (const auto& f : failed) o.detail += " [" + f + " failed]";
  return o;
}

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every output file except the wall-clock timings, by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "timings.json") continue;
    files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

Outcome criterion_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() /
                        ("terrafuse-acceptance-" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  WorldSpec spec = reduced(scenario("grass-paved"));
  spec.duration = 5.0;
  std::ofstream(root / "world.json") << world_spec_to_json(spec).dump(2);
  std::ofstream(root / "config.json") << R"({"sgm": {"d_max": 16}, "cusum": {"warmup": 5}})";

  const std::string cli = TERRAFUSE_CLI;
  auto pipeline = [&](const std::string& name, int jobs) {
    const fs::path d = root / name;
    const std::string j = " -j " + std::to_string(jobs);
    const std::string cfg = " -c " + (root / "config.json").string();
    const std::string log = " >> " + (root / (name + ".log")).string() + " 2>&1";
    return shell(cli + " synth --spec " + (root / "world.json").string() + " --seed 11 -o " +
                 (d / "data").string() + j + log) == 0 &&
           shell(cli + " fuse " + (d / "data").string() + cfg + j + " -o " + (d / "fused").string() + log) == 0 &&
           shell(cli + " features " + (d / "data").string() + cfg + j + " --map " + (d / "fused").string() +
                 " -o " + (d / "features" / "features.csv").string() + log) == 0 &&
           shell(cli + " detect " + (d / "features" / "features.csv").string() + cfg + " -o " +
                 (d / "events" / "events.csv").string() + log) == 0;
  };
  const bool ran = pipeline("a", 1) && pipeline("b", 1) && pipeline("c", 4);
  std::size_t files = 0;
  bool same = false;
  if (ran) {
    const auto a = tree(root / "a"), b = tree(root / "b"), c = tree(root / "c");
    files = a.size();
    same = a == b && a == c;
  }
  o.pass = ran && same && files > 0;
  o.detail = ran ? fmt("%zu files byte-identical across two runs and --jobs 1 vs 4: %s", files,
                       same ? "yes" : "no")
                 : "CLI pipeline failed; logs in " + root.string();
  if (o.pass) fs::remove_all(root);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "RMS signatures", criterion_rms},
      {2, "change detection", criterion_change},
      {3, "NDVI layer", criterion_ndvi},
      {4, "stereo geometry", criterion_stereo},
      {5, "thermal registration", criterion_thermal},
      {6, "calibration", criterion_calibration},
      {7, "motion", criterion_motion},
      {8, "oracle suites", criterion_oracles},
      {9, "determinism", criterion_determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0, ran = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %-21s %s  %s (%.1f s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), since(t0));
    std::fflush(stdout);
  }
  std::printf("acceptance: %d of %d criteria pass\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
