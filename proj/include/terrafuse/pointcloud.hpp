#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "terrafuse/geomcore.hpp"

namespace terrafuse {

using Rgb = std::array<std::uint8_t, 3>;

struct CloudPoint {
  Vec3 position = Vec3::Zero();  // m
  Rgb rgb{};
  int frame_id = 0;

  bool operator==(const CloudPoint&) const = default;
};

struct PointCloud {
  std::vector<CloudPoint> points;
  std::string frame = "camera";  // frame the positions are expressed in

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct OutlierFilterParams {
  int k = 8;
  double alpha = 1.0;
};

struct OutlierFilterResult {
  PointCloud cloud;
  std::size_t removed = 0;
  // Set when the cloud has fewer than k+1 points and was passed through.
  bool too_small = false;
};

// Drops points whose mean distance to their k nearest neighbors exceeds
// mean + alpha * stddev of that statistic over the cloud. Survivors keep
// their input order.
OutlierFilterResult statistical_outlier_filter(const PointCloud& cloud,
                                               const OutlierFilterParams& params = {});

// One point per occupied cube of side `cell` (grid anchored at the origin),
// at the member centroid with rounded mean color. Cells appear in order of
// their first member; the frame id is taken from that member.
PointCloud voxel_downsample(const PointCloud& cloud, double cell);

}  // namespace terrafuse
