#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "terrafuse/error.hpp"
#include "terrafuse/synthgen.hpp"

namespace terrafuse {
namespace {

enum Stream : std::uint64_t { kStereo = 1, kThermal = 2, kVisnir = 3, kImu = 4, kTracks = 5 };

constexpr std::uint16_t kSkyGray = 200;

void check_time(const World& world, double t) {
  if (!(t >= 0.0 && t <= world.duration())) {
    std::ostringstream msg;
    msg << "t = " << t << " s outside the trajectory [0, " << world.duration() << "]";
    fail(ErrorCode::kInvalidTime, msg.str());
  }
}

// Renders one rectified view whose camera sits at T_world_cam. Optionally
// records depth along the optical axis and the hit material per pixel.
ImageBuffer render_view(const World& world, const RigidTransform& T_world_cam, const PinholeCamera& cam,
                        double sigma, std::mt19937_64& gen, std::vector<double>* depth,
                        std::vector<int>* materials) {
  ImageBuffer img(cam.width, cam.height, 3, 8);
  const Mat3 R = T_world_cam.rotation.matrix();
  const Vec3 origin = T_world_cam.translation;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 ray_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const auto hit = world.raycast(origin, R * ray_cam);
      Rgb rgb{kSkyGray, kSkyGray, kSkyGray};
      if (hit) {
        rgb = world.color_at(hit->material, hit->point.x(), hit->point.y());
        if (depth) (*depth)[std::size_t(v) * cam.width + u] = hit->range;  // ray_cam.z == 1
        if (materials) (*materials)[std::size_t(v) * cam.width + u] = hit->material;
      }
      for (int c = 0; c < 3; ++c) {
        double value = rgb[c];
        if (sigma > 0.0) value += sigma * noise(gen);
        img.at(u, v, c) = static_cast<std::uint16_t>(std::clamp(std::lround(value), 0L, 255L));
      }
    }
  }
  return img;
}

}  // namespace

RenderedStereo render_stereo(const World& world, double t, int frame_index, bool with_right) {
  check_time(world, t);
  const CalibrationSet& calib = world.calibration();
  const RigidTransform T_world_left = world.left_pose(t);
  const RigidTransform T_world_right = compose(T_world_left, invert(calib.T_right_left));
  const double sigma = world.spec().noise.image_sigma;
  const int w = calib.left_cam.width;
  const int h = calib.left_cam.height;

  RenderedStereo out;
  std::vector<double> depth(std::size_t(w) * h, 0.0);
  out.truth.material_ids.assign(std::size_t(w) * h, -1);
  auto gen_left = world.rng(kStereo, 2 * std::uint64_t(frame_index));
  auto gen_right = world.rng(kStereo, 2 * std::uint64_t(frame_index) + 1);
  out.left = render_view(world, T_world_left, calib.left_cam, sigma, gen_left, &depth,
                         &out.truth.material_ids);
  if (with_right) {
    out.right = render_view(world, T_world_right, calib.right_cam, sigma, gen_right, nullptr, nullptr);
  }

  out.truth.disparity = DisparityMap(w, h);
  const double fb = calib.left_cam.fx * calib.baseline;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth[i] > 0.0) out.truth.disparity.d[i] = static_cast<float>(fb / depth[i]);
  }
  return out;
}

ImageBuffer render_thermal(const World& world, double t, int frame_index) {
  check_time(world, t);
  const CalibrationSet& calib = world.calibration();
  const PinholeCamera& cam = calib.thermal_cam;
  const RigidTransform T_world_thermal = compose(world.left_pose(t), calib.T_left_thermal);
  const Mat3 R = T_world_thermal.rotation.matrix();
  const double sigma = world.spec().noise.thermal_sigma;
  auto gen = world.rng(kThermal, std::uint64_t(frame_index));
  std::normal_distribution<double> noise(0.0, 1.0);

  ImageBuffer img(cam.width, cam.height, 1, 16);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 ray = back_project(cam, u, v, 1.0);
      const auto hit = world.raycast(T_world_thermal.translation, R * ray);
      double value = 0.0;
      if (hit) value = world.thermal_at(hit->material, hit->point.x(), hit->point.y());
      if (sigma > 0.0) value += sigma * noise(gen);
      img.at(u, v) = static_cast<std::uint16_t>(std::clamp(std::lround(value), 0L, 65535L));
    }
  }
  return img;
}

SpectralLine render_visnir(const World& world, double t, int line_index) {
  check_time(world, t);
  const CalibrationSet& calib = world.calibration();
  const PinholeCamera& cam = calib.left_cam;
  const RigidTransform T_world_left = world.left_pose(t);
  const Mat3 R = T_world_left.rotation.matrix();
  const double sigma = world.spec().noise.spectral_sigma;
  auto gen = world.rng(kVisnir, std::uint64_t(line_index));
  std::normal_distribution<double> noise(0.0, 1.0);

  SpectralLine line;
  line.band_centers = calib.scanline.band_centers;
  line.columns = world.spec().rig.visnir_columns;
  const std::size_t bands = line.band_centers.size();
  line.values.assign(bands * line.columns, 0.0f);
  for (int c = 0; c < line.columns; ++c) {
    const double u = (c + 0.5) * cam.width / line.columns - 0.5;
    const double v = calib.scanline.v_at(u);
    const Vec3 ray((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    const auto hit = world.raycast(T_world_left.translation, R * ray);
    for (std::size_t b = 0; b < bands; ++b) {
      double value = hit ? world.material(hit->material).reflectance_at(line.band_centers[b]) : 0.0;
      if (sigma > 0.0) value += sigma * noise(gen);
      line.values[c * bands + b] = static_cast<float>(std::max(0.0, value));
    }
  }
  return line;
}

std::vector<ImuSample> generate_imu(const World& world) {
  const WorldSpec& spec = world.spec();
  const std::vector<double> times = stream_times(spec.rates.imu, world.duration());
  auto gen = world.rng(kImu, 0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Vec3> dyn(times.size());
  std::vector<int> material(times.size());
  std::map<std::pair<long, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    dyn[i] = Vec3(spec.noise.lateral_accel_sigma * noise(gen),
                  spec.noise.lateral_accel_sigma * noise(gen), noise(gen));
    material[i] = world.ground_material_at(world.vehicle_pose(t).translation.x());
    long k = static_cast<long>(std::floor(t * spec.rates.stereo));
    while (static_cast<double>(k + 1) / spec.rates.stereo <= t) ++k;
    while (k > 0 && static_cast<double>(k) / spec.rates.stereo > t) --k;
    groups[{k, material[i]}].push_back(i);
  }
  // Exact per-group RMS, so any window built from whole stereo intervals on
  // one material reproduces the target.
  for (const auto& [key, idx] : groups) {
    double ss = 0.0;
    for (std::size_t i : idx) ss += dyn[i].z() * dyn[i].z();
    const double r = std::sqrt(ss / idx.size());
    const double target = world.material(key.second).rms_az_target;
    for (std::size_t i : idx) dyn[i].z() = r > 0.0 ? dyn[i].z() * target / r : target;
  }

  const double tilt = spec.noise.imu_tilt_deg * M_PI / 180.0;
  const UnitQuaternion mount =
      tilt != 0.0 ? UnitQuaternion::from_axis_angle(Vec3(1.0, 1.0, 0.0), tilt) : UnitQuaternion::identity();
  const Vec3 g(0.0, 0.0, -kGravity);
  std::vector<ImuSample> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const UnitQuaternion q = world.vehicle_pose(times[i]).rotation * mount;
    out.push_back({times[i], quat_rotate(q.inverse(), dyn[i] + g), q});
  }
  return out;
}

std::vector<LandmarkObservation> observe_landmarks(const World& world, double t, int frame_index) {
  check_time(world, t);
  const CalibrationSet& calib = world.calibration();
  const PinholeCamera& cam = calib.left_cam;
  const RigidTransform T_left_world = invert(world.left_pose(t));
  const double fb = cam.fx * calib.baseline;
  const double outliers = world.spec().noise.track_outlier_fraction;
  auto gen = world.rng(kTracks, std::uint64_t(frame_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<LandmarkObservation> obs;
  const auto& lms = world.landmarks();
  for (std::size_t i = 0; i < lms.size(); ++i) {
    const Vec3 p = T_left_world(lms[i]);
    if (!(p.z() > 0.1)) continue;
    const auto ip = project(cam, p);
    if (!ip || !ip->in_bounds) continue;
    const double d = fb / p.z();
    if (!cam.in_bounds(ip->u - d, ip->v)) continue;
    LandmarkObservation o{static_cast<int>(i), ip->u, ip->v, d};
    // Draws happen for every visible landmark so the inlier set does not
    // depend on the outlier fraction.
    const double roll = unit(gen);
    const double ru = unit(gen), rv = unit(gen), rd = unit(gen);
    if (roll < outliers) {
      o.u = ru * (cam.width - 1);
      o.v = rv * (cam.height - 1);
      o.disparity = 1.0 + rd * 0.25 * cam.width;
    }
    obs.push_back(o);
  }
  return obs;
}

RenderedFrame render_frame(const World& world, double t, int frame_index) {
  check_time(world, t);
  RenderedStereo stereo = render_stereo(world, t, frame_index);
  RenderedFrame f;
  f.bundle.index = frame_index;
  f.bundle.t = t;
  f.bundle.left = std::move(stereo.left);
  f.bundle.right = std::move(stereo.right);
  f.bundle.thermal = render_thermal(world, t, frame_index);
  f.bundle.thermal_t = t;
  f.bundle.visnir = render_visnir(world, t, frame_index);
  f.bundle.visnir_t = t;
  const double t_next = t + 1.0 / world.spec().rates.stereo;
  for (const ImuSample& s : generate_imu(world)) {
    if (s.t >= t && s.t < t_next) f.bundle.imu.push_back(s);
  }
  f.bundle.pose = world.vehicle_pose(t);
  f.bundle.tracks = observe_landmarks(world, t, frame_index);
  f.truth = std::move(stereo.truth);
  return f;
}

}  // namespace terrafuse
