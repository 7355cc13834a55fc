#include "terrafuse/fusionmap.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "terrafuse/error.hpp"

namespace terrafuse {

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct CellAcc {
  Vec3 sum = Vec3::Zero();
  std::array<std::uint32_t, 3> rgb{};
  std::uint32_t count = 0;
  double thermal_sum = 0.0;
  std::uint32_t thermal_count = 0;
  double ndvi_sum = 0.0;
  std::uint32_t ndvi_count = 0;
  std::optional<std::int64_t> spectrum_ref;
  int frame_id = 0;

  void add(const MapPoint& p) {
    sum += p.position;
    for (int c = 0; c < 3; ++c) rgb[c] += p.rgb[c];
    if (p.thermal) {
      thermal_sum += *p.thermal;
      ++thermal_count;
    }
    if (p.ndvi) {
      ndvi_sum += *p.ndvi;
      ++ndvi_count;
    }
    if (p.spectrum_ref && (!spectrum_ref || *p.spectrum_ref < *spectrum_ref)) {
      spectrum_ref = p.spectrum_ref;
    }
    frame_id = count == 0 ? p.frame_id : std::max(frame_id, p.frame_id);
    ++count;
  }

  MapPoint point() const {
    MapPoint p;
    p.position = sum / static_cast<double>(count);
    for (int c = 0; c < 3; ++c) {
      p.rgb[c] = static_cast<std::uint8_t>((2 * rgb[c] + count) / (2 * count));
    }
    if (thermal_count) p.thermal = thermal_sum / thermal_count;
    if (ndvi_count) p.ndvi = std::clamp(ndvi_sum / ndvi_count, -1.0, 1.0);
    p.spectrum_ref = spectrum_ref;
    p.frame_id = frame_id;
    return p;
  }
};

}  // namespace

Aabb bounds_of(std::span<const MapPoint> points) {
  Aabb box;
  for (const auto& p : points) box.extend(p.position);
  return box;
}

std::vector<MapPoint> to_world(const PointCloud& cloud, const RigidTransform& T_world_cam) {
  std::vector<MapPoint> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    MapPoint m;
    m.position = T_world_cam(p.position);
    m.rgb = p.rgb;
    m.frame_id = p.frame_id;
    out.push_back(m);
  }
  return out;
}

void merge_points(MultiLayerMap& map, std::span<const MapPoint> points) {
  if (!(map.cell_size > 0.0)) fail(ErrorCode::kInvalidArgument, "map cell size must be positive");
  if (points.empty()) return;
  if (map.points.empty()) {
    map.points.assign(points.begin(), points.end());
    return;
  }
  // A map point lies in the overlap box iff it lies in the new points' box,
  // so one pass both finds the map's box and pulls out the overlap.
  const double cell = map.cell_size;
  const Aabb incoming = bounds_of(points);
  std::unordered_map<CellKey, std::uint32_t, CellHash> index;
  index.reserve(2 * points.size());
  std::vector<CellAcc> cells;
  auto add = [&](const MapPoint& p) {
    const CellKey key{static_cast<std::int64_t>(std::floor(p.position.x() / cell)),
                      static_cast<std::int64_t>(std::floor(p.position.y() / cell)),
                      static_cast<std::int64_t>(std::floor(p.position.z() / cell))};
    const auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(cells.size()));
    if (inserted) cells.emplace_back();
    cells[it->second].add(p);
  };

  Aabb existing;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    const MapPoint& p = map.points[i];
    existing.extend(p.position);
    if (incoming.contains(p.position)) {
      add(p);
    } else {
      if (kept != i) map.points[kept] = std::move(map.points[i]);
      ++kept;
    }
  }
  map.points.resize(kept);
  std::vector<const MapPoint*> outside_new;
  for (const auto& p : points) {
    if (existing.contains(p.position)) {
      add(p);
    } else {
      outside_new.push_back(&p);
    }
  }
  for (const auto& c : cells) map.points.push_back(c.point());
  for (const MapPoint* p : outside_new) map.points.push_back(*p);
}

void merge_cloud(MultiLayerMap& map, const PointCloud& cloud,
                 const RigidTransform& T_world_cam) {
  const auto pts = to_world(cloud, T_world_cam);
  merge_points(map, pts);
}

std::size_t attach_thermal(std::span<MapPoint> points, const ImageBuffer& thermal,
                           const CalibrationSet& calib, const RigidTransform& T_world_left) {
  if (thermal.channels != 1 || thermal.bit_depth != 16) {
    fail(ErrorCode::kInvalidArgument, "thermal image must be 16-bit single channel");
  }
  const PinholeCamera& cam = calib.thermal_cam;
  if (thermal.width != cam.width || thermal.height != cam.height) {
    fail(ErrorCode::kInvalidArgument, "thermal image size differs from its calibration");
  }
  const RigidTransform T_thermal_world = invert(compose(T_world_left, calib.T_left_thermal));
  std::size_t hits = 0;
  for (auto& p : points) {
    const auto ip = project(cam, T_thermal_world(p.position));
    if (!ip || !ip->in_bounds) continue;
    p.thermal = sample_bilinear(thermal, ip->u, ip->v);
    ++hits;
  }
  return hits;
}

int scanline_column(double u, int image_width, int columns) {
  const long c = std::lround((u + 0.5) * columns / image_width - 0.5);
  return static_cast<int>(std::clamp<long>(c, 0, columns - 1));
}

std::size_t attach_spectra(std::span<MapPoint> points, const SpectralLine& line,
                           const CalibrationSet& calib, const RigidTransform& T_world_left,
                           int frame_id, double max_distance_px) {
  if (line.columns <= 0) return 0;
  const PinholeCamera& cam = calib.left_cam;
  const ScanLine& sl = calib.scanline;
  const double norm = std::sqrt(sl.slope * sl.slope + 1.0);
  const RigidTransform T_left_world = invert(T_world_left);
  std::vector<std::optional<double>> ndvi_cache(line.columns);
  std::vector<bool> cached(line.columns, false);
  std::size_t hits = 0;
  for (auto& p : points) {
    const auto ip = project(cam, T_left_world(p.position));
    if (!ip || !ip->in_bounds) continue;
    if (std::abs(sl.slope * ip->u - ip->v + sl.intercept) / norm > max_distance_px) continue;
    const int col = scanline_column(ip->u, cam.width, line.columns);
    if (!cached[col]) {
      try {
        ndvi_cache[col] = ndvi(line.column(col), line.band_centers);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUndefinedNdvi) throw;
      }
      cached[col] = true;
    }
    p.spectrum_ref = make_spectrum_ref(frame_id, col);
    p.ndvi = ndvi_cache[col];
    ++hits;
  }
  return hits;
}

}  // namespace terrafuse
