#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "terrafuse/calib.hpp"
#include "terrafuse/dataset.hpp"
#include "terrafuse/pointcloud.hpp"
#include "terrafuse/spectral.hpp"
#include "terrafuse/stereo.hpp"

namespace terrafuse {

struct Material {
  std::string name;
  Rgb rgb{};                       // base color
  double texture_amplitude = 0.0;  // relative color modulation
  double thermal_counts = 0.0;     // 16-bit radiance counts
  double thermal_texture = 0.0;    // relative thermal modulation
  // Piecewise-linear reflectance, (wavelength nm, value), increasing nm.
  std::vector<std::pair<double, double>> reflectance;
  double rms_az_target = 0.0;  // m/s^2
  double roughness = 0.0;      // m, height-field amplitude

  double reflectance_at(double nm) const;
  void validate() const;
};

Material grass_material();
Material ploughed_material();
Material paved_material();
std::vector<Material> default_materials();

struct TerrainSegment {
  std::string material;
  double length = 0.0;  // m along world x
};

// Axis-aligned box standing on the ground.
struct Obstacle {
  Vec3 center = Vec3::Zero();
  Vec3 half_size = Vec3::Constant(0.1);
  std::string material;
};

struct RigSpec {
  int width = 320;
  int height = 240;
  double focal = 320.0;       // px, stereo cameras
  double baseline = 0.04;     // m
  Vec3 left_position{0.1, 0.02, 0.8};  // m, vehicle frame
  double pitch_deg = 30.0;    // downward tilt of the optical axis
  int thermal_width = 160;
  int thermal_height = 120;
  double thermal_focal = 150.0;
  double thermal_k1 = -0.05;
  Vec3 thermal_offset{0.06, -0.03, 0.01};       // m, in the left camera frame
  Vec3 thermal_rotation{0.01, -0.02, 0.005};    // rad, rotation vector
  double scanline_distance = 2.0;  // m ahead of the front axle
  int visnir_columns = 32;
  double band_min_nm = 400.0;
  double band_step_nm = 2.0;
  int band_count = 300;
};

struct NoiseSpec {
  double image_sigma = 0.0;    // 8-bit counts, stereo images
  double thermal_sigma = 20.0;  // counts
  double spectral_sigma = 0.01;
  bool texture = true;  // color and thermal texture; off gives flat materials
  double lateral_accel_sigma = 0.02;  // m/s^2, x/y dynamic acceleration
  double imu_tilt_deg = 2.0;          // sensor mounting tilt
  double track_outlier_fraction = 0.0;
};

struct RateSpec {
  double stereo = 7.5;
  double thermal = 15.0;
  double visnir = 128.0;
  double imu = 128.0;
  void validate() const;
};

struct WorldSpec {
  std::vector<Material> materials = default_materials();
  std::vector<TerrainSegment> segments;
  std::vector<Obstacle> obstacles;
  double speed = 0.8;     // m/s
  double yaw_rate = 0.0;  // rad/s, 0 for a straight path
  double duration = 0.0;  // s; 0 means total segment length / speed
  int landmark_count = 400;
  RigSpec rig;
  NoiseSpec noise;
  RateSpec rates;

  const Material& material(const std::string& name) const;
  double total_length() const;
  double effective_duration() const;
  // Time at which the front axle crosses the start of segment i.
  double boundary_time(std::size_t i) const;
  void validate() const;
};

nlohmann::json world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const nlohmann::json& j);

// Named scenarios used by the CLI and tests.
WorldSpec scenario(const std::string& name);

struct RayHit {
  Vec3 point = Vec3::Zero();
  int material = -1;  // index into spec.materials
  double range = 0.0;
};

// Deterministic terrain, trajectory and landmark set for a spec and seed.
class World {
 public:
  World(WorldSpec spec, std::uint64_t seed);

  const WorldSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  double duration() const { return spec_.effective_duration(); }

  // Material along the path: segments start at x = 0; the first extends
  // backwards and the last forwards without bound.
  int ground_material_at(double x) const;
  const Material& material(int index) const { return spec_.materials[index]; }
  double height_at(double x, double y) const;
  Rgb color_at(int material, double x, double y) const;
  double thermal_at(int material, double x, double y) const;

  RigidTransform vehicle_pose(double t) const;  // T_world_vehicle
  RigidTransform left_pose(double t) const;     // T_world_left
  // Rectified stereo, thermal and scan line geometry implied by the rig.
  const CalibrationSet& calibration() const { return calib_; }
  const std::vector<Vec3>& landmarks() const { return landmarks_; }

  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir) const;

  // Stable per-purpose random stream.
  std::mt19937_64 rng(std::uint64_t stream, std::uint64_t index) const;

 private:
  double noise(double x, double y, std::uint64_t layer) const;

  WorldSpec spec_;
  std::uint64_t seed_;
  CalibrationSet calib_;
  std::vector<Vec3> landmarks_;
  std::vector<int> obstacle_material_;
};

World generate_world(const WorldSpec& spec, std::uint64_t seed);

struct StereoTruth {
  DisparityMap disparity;          // exact, invalid off-ground
  std::vector<int> material_ids;   // per left pixel, -1 for sky
};

struct RenderedStereo {
  ImageBuffer left;
  ImageBuffer right;
  StereoTruth truth;
};

// Without the right view the returned right image is empty; the left view
// and truth are unchanged.
RenderedStereo render_stereo(const World& world, double t, int frame_index, bool with_right = true);
ImageBuffer render_thermal(const World& world, double t, int frame_index);
SpectralLine render_visnir(const World& world, double t, int line_index);
// Whole IMU stream. Vertical dynamic acceleration is white Gaussian noise
// rescaled so every (stereo interval, axle material) group has exactly the
// material's RMS target.
std::vector<ImuSample> generate_imu(const World& world);
std::vector<LandmarkObservation> observe_landmarks(const World& world, double t, int frame_index);

// Everything for one stereo instant, read straight from the world.
struct RenderedFrame {
  FrameBundle bundle;
  StereoTruth truth;
};
RenderedFrame render_frame(const World& world, double t, int frame_index);

std::vector<double> stream_times(double rate, double duration);

struct GenerateReport {
  DatasetCounts counts;
};

// Writes a terrafuse-dataset/1 directory plus ground-truth sidecars:
// gt_poses.csv, gt_materials.csv, gt_landmarks.csv, gt_counts.json and
// gt_world.json.
GenerateReport generate_dataset(const World& world, const std::filesystem::path& out, int jobs = 1);

}  // namespace terrafuse
