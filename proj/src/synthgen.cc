#include "terrafuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "terrafuse/error.hpp"

namespace terrafuse {

using nlohmann::json;

double Material::reflectance_at(double nm) const {
  if (reflectance.empty()) return 0.0;
  if (nm <= reflectance.front().first) return reflectance.front().second;
  if (nm >= reflectance.back().first) return reflectance.back().second;
  const auto hi = std::upper_bound(reflectance.begin(), reflectance.end(), nm,
                                   [](double v, const auto& p) { return v < p.first; });
  const auto lo = hi - 1;
  const double a = (nm - lo->first) / (hi->first - lo->first);
  return lo->second + a * (hi->second - lo->second);
}

void Material::validate() const {
  if (name.empty()) fail(ErrorCode::kInvalidArgument, "material needs a name");
  if (reflectance.empty()) fail(ErrorCode::kInvalidArgument, name + ": empty reflectance table");
  for (std::size_t i = 0; i < reflectance.size(); ++i) {
    if (reflectance[i].second < 0.0) {
      fail(ErrorCode::kInvalidArgument, name + ": negative reflectance");
    }
    if (i > 0 && !(reflectance[i].first > reflectance[i - 1].first)) {
      fail(ErrorCode::kInvalidArgument, name + ": reflectance wavelengths must increase");
    }
  }
  if (!(rms_az_target >= 0.0)) fail(ErrorCode::kInvalidArgument, name + ": negative RMS target");
  if (!(thermal_counts >= 0.0 && thermal_counts <= 65535.0)) {
    fail(ErrorCode::kInvalidArgument, name + ": thermal counts outside 16-bit range");
  }
  if (!(roughness >= 0.0) || !(texture_amplitude >= 0.0) || !(thermal_texture >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, name + ": negative texture or roughness");
  }
}

// Red and NIR reflectances sit on straight pieces around 670 nm and on a
// flat piece around 800 nm, so band-window means equal the nominal values.
Material grass_material() {
  return {"grass", {70, 125, 45}, 0.25, 3000.0, 0.03,
          {{400, 0.06}, {550, 0.14}, {640, 0.18}, {700, 0.24}, {780, 0.50}, {850, 0.50}, {1000, 0.52}},
          0.050, 0.0};
}

Material ploughed_material() {
  return {"ploughed", {110, 85, 60}, 0.25, 3600.0, 0.03,
          {{400, 0.08}, {640, 0.20}, {700, 0.22}, {780, 0.19}, {850, 0.19}, {1000, 0.20}},
          0.065, 0.0};
}

Material paved_material() {
  return {"paved", {128, 126, 132}, 0.25, 4200.0, 0.03,
          {{400, 0.25}, {640, 0.32}, {700, 0.34}, {780, 0.27}, {850, 0.27}, {1000, 0.28}},
          0.085, 0.0};
}

std::vector<Material> default_materials() {
  return {grass_material(), ploughed_material(), paved_material()};
}

void RateSpec::validate() const {
  if (!(stereo > 0.0 && thermal > 0.0 && visnir > 0.0 && imu > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "sensor rates must be positive");
  }
}

const Material& WorldSpec::material(const std::string& name) const {
  for (const auto& m : materials) {
    if (m.name == name) return m;
  }
  fail(ErrorCode::kInvalidArgument, "unknown material '" + name + "'");
}

double WorldSpec::total_length() const {
  double s = 0.0;
  for (const auto& seg : segments) s += seg.length;
  return s;
}

double WorldSpec::effective_duration() const {
  return duration > 0.0 ? duration : total_length() / speed;
}

double WorldSpec::boundary_time(std::size_t i) const {
  double x = 0.0;
  for (std::size_t k = 0; k < i && k < segments.size(); ++k) x += segments[k].length;
  return x / speed;
}

void WorldSpec::validate() const {
  if (materials.empty()) fail(ErrorCode::kInvalidArgument, "world has no materials");
  for (const auto& m : materials) m.validate();
  if (segments.empty()) fail(ErrorCode::kInvalidArgument, "world has no terrain segments");
  for (const auto& s : segments) {
    if (!(s.length > 0.0)) {
      fail(ErrorCode::kInvalidArgument, "segment '" + s.material + "' must have positive length");
    }
    material(s.material);
  }
  for (const auto& o : obstacles) {
    material(o.material);
    if (!(o.half_size.array() > 0.0).all()) {
      fail(ErrorCode::kInvalidArgument, "obstacle sizes must be positive");
    }
  }
  if (!(speed > 0.0)) fail(ErrorCode::kInvalidArgument, "speed must be positive");
  if (!(duration >= 0.0)) fail(ErrorCode::kInvalidArgument, "duration must be non-negative");
  if (landmark_count < 0) fail(ErrorCode::kInvalidArgument, "landmark count must be non-negative");
  rates.validate();
  if (rig.width <= 0 || rig.height <= 0 || rig.thermal_width <= 0 || rig.thermal_height <= 0 ||
      !(rig.focal > 0.0) || !(rig.thermal_focal > 0.0) || !(rig.baseline > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "rig sizes, focal lengths and baseline must be positive");
  }
  if (rig.visnir_columns <= 0 || rig.band_count < 300 || !(rig.band_step_nm > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "VIS-NIR line needs columns > 0 and at least 300 bands");
  }
  if (!(noise.track_outlier_fraction >= 0.0 && noise.track_outlier_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "track outlier fraction must lie in [0, 1]");
  }
  if (!(noise.image_sigma >= 0.0 && noise.thermal_sigma >= 0.0 && noise.spectral_sigma >= 0.0 &&
        noise.lateral_accel_sigma >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "noise levels must be non-negative");
  }
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json material_json(const Material& m) {
  json refl = json::array();
  for (const auto& [nm, v] : m.reflectance) refl.push_back(json::array({nm, v}));
  return {{"name", m.name},
          {"rgb", {m.rgb[0], m.rgb[1], m.rgb[2]}},
          {"texture_amplitude", m.texture_amplitude},
          {"thermal_counts", m.thermal_counts},
          {"thermal_texture", m.thermal_texture},
          {"reflectance", refl},
          {"rms_az_target", m.rms_az_target},
          {"roughness", m.roughness}};
}

Material material_from(const json& j) {
  Material m;
  m.name = j.at("name").get<std::string>();
  const auto rgb = j.at("rgb").get<std::vector<int>>();
  if (rgb.size() != 3) fail(ErrorCode::kBadSchema, m.name + ": rgb needs 3 values");
  for (int c = 0; c < 3; ++c) m.rgb[c] = static_cast<std::uint8_t>(std::clamp(rgb[c], 0, 255));
  m.texture_amplitude = j.value("texture_amplitude", 0.0);
  m.thermal_counts = j.at("thermal_counts").get<double>();
  m.thermal_texture = j.value("thermal_texture", 0.0);
  for (const json& p : j.at("reflectance")) {
    m.reflectance.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  m.rms_az_target = j.at("rms_az_target").get<double>();
  m.roughness = j.value("roughness", 0.0);
  return m;
}

}  // namespace

json world_spec_to_json(const WorldSpec& s) {
  json mats = json::array();
  for (const auto& m : s.materials) mats.push_back(material_json(m));
  json segs = json::array();
  for (const auto& g : s.segments) segs.push_back({{"material", g.material}, {"length", g.length}});
  json obs = json::array();
  for (const auto& o : s.obstacles) {
    obs.push_back({{"center", vec3_json(o.center)}, {"half_size", vec3_json(o.half_size)},
                   {"material", o.material}});
  }
  const RigSpec& r = s.rig;
  const NoiseSpec& n = s.noise;
  return {
      {"materials", mats},
      {"segments", segs},
      {"obstacles", obs},
      {"speed", s.speed},
      {"yaw_rate", s.yaw_rate},
      {"duration", s.duration},
      {"landmark_count", s.landmark_count},
      {"rig",
       {{"width", r.width}, {"height", r.height}, {"focal", r.focal}, {"baseline", r.baseline},
        {"left_position", vec3_json(r.left_position)}, {"pitch_deg", r.pitch_deg},
        {"thermal_width", r.thermal_width}, {"thermal_height", r.thermal_height},
        {"thermal_focal", r.thermal_focal}, {"thermal_k1", r.thermal_k1},
        {"thermal_offset", vec3_json(r.thermal_offset)},
        {"thermal_rotation", vec3_json(r.thermal_rotation)},
        {"scanline_distance", r.scanline_distance}, {"visnir_columns", r.visnir_columns},
        {"band_min_nm", r.band_min_nm}, {"band_step_nm", r.band_step_nm},
        {"band_count", r.band_count}}},
      {"noise",
       {{"image_sigma", n.image_sigma}, {"thermal_sigma", n.thermal_sigma},
        {"spectral_sigma", n.spectral_sigma}, {"texture", n.texture},
        {"lateral_accel_sigma", n.lateral_accel_sigma}, {"imu_tilt_deg", n.imu_tilt_deg},
        {"track_outlier_fraction", n.track_outlier_fraction}}},
      {"rates",
       {{"stereo", s.rates.stereo}, {"thermal", s.rates.thermal}, {"visnir", s.rates.visnir},
        {"imu", s.rates.imu}}}};
}

WorldSpec world_spec_from_json(const json& j) {
  try {
    WorldSpec s;
    if (j.contains("materials")) {
      s.materials.clear();
      for (const json& m : j.at("materials")) s.materials.push_back(material_from(m));
    }
    for (const json& g : j.at("segments")) {
      s.segments.push_back({g.at("material").get<std::string>(), g.at("length").get<double>()});
    }
    if (j.contains("obstacles")) {
      for (const json& o : j.at("obstacles")) {
        s.obstacles.push_back({vec3_from(o.at("center")), vec3_from(o.at("half_size")),
                               o.at("material").get<std::string>()});
      }
    }
    s.speed = j.value("speed", s.speed);
    s.yaw_rate = j.value("yaw_rate", s.yaw_rate);
    s.duration = j.value("duration", s.duration);
    s.landmark_count = j.value("landmark_count", s.landmark_count);
    if (j.contains("rig")) {
      const json& r = j.at("rig");
      RigSpec& g = s.rig;
      g.width = r.value("width", g.width);
      g.height = r.value("height", g.height);
      g.focal = r.value("focal", g.focal);
      g.baseline = r.value("baseline", g.baseline);
      if (r.contains("left_position")) g.left_position = vec3_from(r.at("left_position"));
      g.pitch_deg = r.value("pitch_deg", g.pitch_deg);
      g.thermal_width = r.value("thermal_width", g.thermal_width);
      g.thermal_height = r.value("thermal_height", g.thermal_height);
      g.thermal_focal = r.value("thermal_focal", g.thermal_focal);
      g.thermal_k1 = r.value("thermal_k1", g.thermal_k1);
      if (r.contains("thermal_offset")) g.thermal_offset = vec3_from(r.at("thermal_offset"));
      if (r.contains("thermal_rotation")) g.thermal_rotation = vec3_from(r.at("thermal_rotation"));
      g.scanline_distance = r.value("scanline_distance", g.scanline_distance);
      g.visnir_columns = r.value("visnir_columns", g.visnir_columns);
      g.band_min_nm = r.value("band_min_nm", g.band_min_nm);
      g.band_step_nm = r.value("band_step_nm", g.band_step_nm);
      g.band_count = r.value("band_count", g.band_count);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      NoiseSpec& o = s.noise;
      o.image_sigma = n.value("image_sigma", o.image_sigma);
      o.thermal_sigma = n.value("thermal_sigma", o.thermal_sigma);
      o.spectral_sigma = n.value("spectral_sigma", o.spectral_sigma);
      o.texture = n.value("texture", o.texture);
      o.lateral_accel_sigma = n.value("lateral_accel_sigma", o.lateral_accel_sigma);
      o.imu_tilt_deg = n.value("imu_tilt_deg", o.imu_tilt_deg);
      o.track_outlier_fraction = n.value("track_outlier_fraction", o.track_outlier_fraction);
    }
    if (j.contains("rates")) {
      const json& r = j.at("rates");
      s.rates.stereo = r.value("stereo", s.rates.stereo);
      s.rates.thermal = r.value("thermal", s.rates.thermal);
      s.rates.visnir = r.value("visnir", s.rates.visnir);
      s.rates.imu = r.value("imu", s.rates.imu);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadSchema, std::string("world spec: ") + e.what());
  }
}

WorldSpec scenario(const std::string& name) {
  WorldSpec s;
  if (name == "grass-paved") {
    s.segments = {{"grass", 8.0}, {"paved", 12.0}};
  } else if (name == "three-surface") {
    s.segments = {{"grass", 8.0}, {"ploughed", 8.0}, {"paved", 8.0}};
  } else if (name.starts_with("uniform-")) {
    s.segments = {{name.substr(8), 20.0}};
  } else {
    fail(ErrorCode::kInvalidArgument,
         "unknown scenario '" + name +
             "' (grass-paved, three-surface, uniform-grass, uniform-ploughed, uniform-paved)");
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

Mat3 vehicle_from_camera(double pitch_rad) {
  Mat3 r0;
  r0 << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  const Mat3 ry = Eigen::AngleAxisd(pitch_rad, Vec3::UnitY()).toRotationMatrix();
  return ry * r0;
}

}  // namespace

World::World(WorldSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
  for (const auto& o : spec_.obstacles) {
    const auto it = std::find_if(spec_.materials.begin(), spec_.materials.end(),
                                 [&](const Material& m) { return m.name == o.material; });
    obstacle_material_.push_back(static_cast<int>(it - spec_.materials.begin()));
  }

  const RigSpec& rig = spec_.rig;
  PinholeCamera cam;
  cam.fx = cam.fy = rig.focal;
  cam.cx = 0.5 * (rig.width - 1);
  cam.cy = 0.5 * (rig.height - 1);
  cam.width = rig.width;
  cam.height = rig.height;
  calib_.left_cam = cam;
  calib_.right_cam = cam;
  PinholeCamera th;
  th.fx = th.fy = rig.thermal_focal;
  th.cx = 0.5 * (rig.thermal_width - 1);
  th.cy = 0.5 * (rig.thermal_height - 1);
  th.k1 = rig.thermal_k1;
  th.width = rig.thermal_width;
  th.height = rig.thermal_height;
  calib_.thermal_cam = th;
  calib_.baseline = rig.baseline;
  calib_.T_right_left = {UnitQuaternion::identity(), Vec3(-rig.baseline, 0.0, 0.0)};
  calib_.T_vehicle_left = {
      UnitQuaternion::from_matrix(vehicle_from_camera(rig.pitch_deg * std::numbers::pi / 180.0)),
      rig.left_position};
  calib_.T_left_thermal = {UnitQuaternion::from_rotation_vector(rig.thermal_rotation),
                           rig.thermal_offset};

  // Horizontal scan line through the image of the ground point straight
  // ahead at the configured distance.
  const Vec3 target_left = invert(calib_.T_vehicle_left)(Vec3(rig.scanline_distance, 0.0, 0.0));
  const auto ip = project(cam, target_left);
  if (!ip || !ip->in_bounds) {
    fail(ErrorCode::kInvalidArgument, "scan line target is not visible in the left camera");
  }
  calib_.scanline.slope = 0.0;
  calib_.scanline.intercept = ip->v;
  for (int b = 0; b < rig.band_count; ++b) {
    calib_.scanline.band_centers.push_back(rig.band_min_nm + b * rig.band_step_nm);
  }
  calib_.scanline.band_count = rig.band_count;
  calib_.validate();

  auto gen = rng(6, 0);
  const double x_lo = -5.0;
  const double x_hi = spec_.speed * duration() + 10.0;
  std::uniform_real_distribution<double> ux(x_lo, x_hi), uy(-3.0, 3.0), uz(0.0, 0.5);
  for (int i = 0; i < spec_.landmark_count; ++i) {
    const double x = ux(gen);
    const double y = uy(gen);
    const double z = uz(gen);
    landmarks_.emplace_back(x, y, z);
  }
}

World generate_world(const WorldSpec& spec, std::uint64_t seed) { return World(spec, seed); }

std::mt19937_64 World::rng(std::uint64_t stream, std::uint64_t index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double World::noise(double x, double y, std::uint64_t layer) const {
  static constexpr double kWavelength[] = {0.16, 0.06, 0.025};
  static constexpr double kWeight[] = {0.5, 0.3, 0.2};
  double sum = 0.0;
  for (int o = 0; o < 3; ++o) {
    const double fx = x / kWavelength[o];
    const double fy = y / kWavelength[o];
    const double ix = std::floor(fx);
    const double iy = std::floor(fy);
    const double tx = smooth(fx - ix);
    const double ty = smooth(fy - iy);
    const std::uint64_t base = splitmix(seed_ ^ splitmix(layer * 8 + o));
    auto lattice = [&](double cx, double cy) {
      const std::uint64_t h = splitmix(base ^ splitmix(static_cast<std::uint64_t>(
                                                  static_cast<std::int64_t>(cx)) * 0x100000001B3ull ^
                                              static_cast<std::uint64_t>(static_cast<std::int64_t>(cy))));
      return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    };
    const double a = lattice(ix, iy);
    const double b = lattice(ix + 1, iy);
    const double c = lattice(ix, iy + 1);
    const double d = lattice(ix + 1, iy + 1);
    const double top = a + tx * (b - a);
    const double bottom = c + tx * (d - c);
    sum += kWeight[o] * (top + ty * (bottom - top));
  }
  return sum;
}

int World::ground_material_at(double x) const {
  double start = 0.0;
  const auto& segs = spec_.segments;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    start += segs[i].length;
    if (x < start) return static_cast<int>(&spec_.material(segs[i].material) - spec_.materials.data());
  }
  return static_cast<int>(&spec_.material(segs.back().material) - spec_.materials.data());
}

double World::height_at(double x, double y) const {
  const double r = material(ground_material_at(x)).roughness;
  return r > 0.0 ? r * noise(x, y, 11) : 0.0;
}

Rgb World::color_at(int m, double x, double y) const {
  const Material& mat = material(m);
  Rgb out = mat.rgb;
  if (!spec_.noise.texture || mat.texture_amplitude == 0.0) return out;
  const double common = noise(x, y, 0);
  for (int c = 0; c < 3; ++c) {
    const double n = 0.6 * common + 0.4 * noise(x, y, 1 + c);
    const double v = mat.rgb[c] * (1.0 + mat.texture_amplitude * n);
    out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

double World::thermal_at(int m, double x, double y) const {
  const Material& mat = material(m);
  if (!spec_.noise.texture || mat.thermal_texture == 0.0) return mat.thermal_counts;
  return mat.thermal_counts * (1.0 + mat.thermal_texture * noise(x, y, 7));
}

RigidTransform World::vehicle_pose(double t) const {
  const double v = spec_.speed;
  const double w = spec_.yaw_rate;
  RigidTransform T;
  if (w == 0.0) {
    T.translation = Vec3(v * t, 0.0, 0.0);
  } else {
    T.translation = Vec3(v / w * std::sin(w * t), v / w * (1.0 - std::cos(w * t)), 0.0);
    T.rotation = UnitQuaternion::from_axis_angle(Vec3::UnitZ(), w * t);
  }
  return T;
}

RigidTransform World::left_pose(double t) const {
  return compose(vehicle_pose(t), calib_.T_vehicle_left);
}

std::optional<RayHit> World::raycast(const Vec3& o, const Vec3& dir) const {
  std::optional<RayHit> best;
  if (dir.z() < 0.0) {
    double s = -o.z() / dir.z();
    for (int it = 0; it < 8; ++it) {
      const Vec3 p = o + s * dir;
      const double h = height_at(p.x(), p.y());
      if (h == 0.0 && it == 0) break;
      const double next = (h - o.z()) / dir.z();
      const bool converged = std::abs(next - s) <= 1e-12 * std::abs(s);
      s = next;
      if (converged) break;
    }
    if (s > 0.0) {
      const Vec3 p = o + s * dir;
      best = RayHit{p, ground_material_at(p.x()), s};
    }
  }
  for (std::size_t i = 0; i < spec_.obstacles.size(); ++i) {
    const Obstacle& ob = spec_.obstacles[i];
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    bool hit = true;
    for (int a = 0; a < 3 && hit; ++a) {
      const double lo = ob.center[a] - ob.half_size[a];
      const double hi = ob.center[a] + ob.half_size[a];
      if (dir[a] == 0.0) {
        hit = o[a] >= lo && o[a] <= hi;
      } else {
        double ta = (lo - o[a]) / dir[a];
        double tb = (hi - o[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        hit = t0 <= t1;
      }
    }
    if (hit && t0 > 0.0 && (!best || t0 < best->range)) {
      best = RayHit{o + t0 * dir, obstacle_material_[i], t0};
    }
  }
  return best;
}

std::vector<double> stream_times(double rate, double duration) {
  std::vector<double> t;
  for (long k = 0;; ++k) {
    const double tk = static_cast<double>(k) / rate;
    if (tk >= duration) break;
    t.push_back(tk);
  }
  return t;
}

}  // namespace terrafuse
