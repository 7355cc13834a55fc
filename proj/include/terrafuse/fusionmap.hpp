#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "terrafuse/calib.hpp"
#include "terrafuse/image.hpp"
#include "terrafuse/pointcloud.hpp"
#include "terrafuse/spectral.hpp"

namespace terrafuse {

struct MapPoint {
  Vec3 position = Vec3::Zero();  // m, world frame
  Rgb rgb{};
  std::optional<double> thermal;  // radiance counts
  std::optional<double> ndvi;     // [-1, 1]
  std::optional<std::int64_t> spectrum_ref;
  int frame_id = 0;

  bool operator==(const MapPoint&) const = default;
};

// Spectra are not copied into the map; a point refers to the column of the
// scan taken with a given stereo frame.
inline std::int64_t make_spectrum_ref(int frame_id, int column) {
  return (static_cast<std::int64_t>(frame_id) << 20) | column;
}
inline int spectrum_ref_frame(std::int64_t ref) { return static_cast<int>(ref >> 20); }
inline int spectrum_ref_column(std::int64_t ref) { return static_cast<int>(ref & 0xFFFFF); }

struct MultiLayerMap {
  std::vector<MapPoint> points;
  double cell_size = 0.02;  // m, box grid cell

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb intersect(const Aabb& o) const { return {min.cwiseMax(o.min), max.cwiseMin(o.max)}; }
};

Aabb bounds_of(std::span<const MapPoint> points);

// Camera-frame cloud to world-frame map points with no layers.
std::vector<MapPoint> to_world(const PointCloud& cloud, const RigidTransform& T_world_cam);

// Box grid merge. Inside the intersection of the map's and the new points'
// bounding boxes, all points sharing a cell collapse to their average
// (position, color, and each layer over the points that carry it). Map
// points outside that box are untouched; new points outside it are appended.
void merge_points(MultiLayerMap& map, std::span<const MapPoint> points);
void merge_cloud(MultiLayerMap& map, const PointCloud& cloud,
                 const RigidTransform& T_world_cam);

// Assigns bilinear thermal counts to points that project inside the thermal
// image. T_world_left is the pose of the (rectified) left camera and
// calib.T_left_thermal places the thermal camera relative to it.
// Returns the number of points that received a value.
std::size_t attach_thermal(std::span<MapPoint> points, const ImageBuffer& thermal,
                           const CalibrationSet& calib, const RigidTransform& T_world_left);

// Points whose left-image projection lies within max_distance_px of the
// scan line get the spectrum of the nearest line column and its NDVI.
// Returns the number of points that received a spectrum.
std::size_t attach_spectra(std::span<MapPoint> points, const SpectralLine& line,
                           const CalibrationSet& calib, const RigidTransform& T_world_left,
                           int frame_id, double max_distance_px = 1.0);

// Column of a line with `columns` entries that covers image column u.
int scanline_column(double u, int image_width, int columns);

}  // namespace terrafuse
