#include "terrafuse/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
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

CellKey cell_of(const Vec3& p, double cell) {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
          static_cast<std::int64_t>(std::floor(p.y() / cell)),
          static_cast<std::int64_t>(std::floor(p.z() / cell))};
}

// Sum of a sorted copy, so the result does not depend on input order.
double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Static 3-d tree over point indices for exact k-nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(const std::vector<CloudPoint>& pts) : pts_(pts), idx_(pts.size()) {
    std::iota(idx_.begin(), idx_.end(), 0u);
    nodes_.reserve(2 * pts.size() / kLeaf + 2);
    build(0, idx_.size());
  }

  // Mean distance from point i to its k nearest other points.
  double mean_knn_distance(std::uint32_t i, std::size_t k) const {
    heap_.clear();
    search(0, i, k);
    double s = 0.0;
    std::sort_heap(heap_.begin(), heap_.end());
    for (double d2 : heap_) s += std::sqrt(d2);
    return s / static_cast<double>(k);
  }

 private:
  static constexpr std::size_t kLeaf = 8;
  struct Node {
    std::uint32_t begin, end;  // leaf range in idx_
    int axis = -1;             // -1 for leaves
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
  };

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)});
    if (end - begin <= kLeaf) return id;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t j = begin; j < end; ++j) {
      lo = lo.cwiseMin(pts_[idx_[j]].position);
      hi = hi.cwiseMax(pts_[idx_[j]].position);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return pts_[a].position[axis] < pts_[b].position[axis];
                     });
    const double split = pts_[idx_[mid]].position[axis];
    const std::uint32_t l = build(begin, mid);
    const std::uint32_t r = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = l;
    n.right = r;
    return id;
  }

  void search(std::uint32_t node, std::uint32_t self, std::size_t k) const {
    const Node& n = nodes_[node];
    const Vec3& p = pts_[self].position;
    if (n.axis < 0) {
      for (std::uint32_t j = n.begin; j < n.end; ++j) {
        const std::uint32_t q = idx_[j];
        if (q == self) continue;
        const double d2 = (pts_[q].position - p).squaredNorm();
        if (heap_.size() < k) {
          heap_.push_back(d2);
          std::push_heap(heap_.begin(), heap_.end());
        } else if (d2 < heap_.front()) {
          std::pop_heap(heap_.begin(), heap_.end());
          heap_.back() = d2;
          std::push_heap(heap_.begin(), heap_.end());
        }
      }
      return;
    }
    const double diff = p[n.axis] - n.split;
    search(diff < 0.0 ? n.left : n.right, self, k);
    if (heap_.size() < k || diff * diff < heap_.front()) search(diff < 0.0 ? n.right : n.left, self, k);
  }

  const std::vector<CloudPoint>& pts_;
  std::vector<std::uint32_t> idx_;
  std::vector<Node> nodes_;
  mutable std::vector<double> heap_;  // squared distances, max-heap
};

}  // namespace

OutlierFilterResult statistical_outlier_filter(const PointCloud& cloud,
                                               const OutlierFilterParams& params) {
  if (params.k < 1) fail(ErrorCode::kInvalidArgument, "outlier filter k must be >= 1");
  OutlierFilterResult result;
  const std::size_t n = cloud.size();
  if (n < static_cast<std::size_t>(params.k) + 1) {
    result.cloud = cloud;
    result.too_small = true;
    return result;
  }

  const KdTree tree(cloud.points);
  const std::size_t k = params.k;
  std::vector<double> mean_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    mean_dist[i] = tree.mean_knn_distance(static_cast<std::uint32_t>(i), k);
  }

  const double mu = ordered_sum(mean_dist) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (mean_dist[i] - mu) * (mean_dist[i] - mu);
  const double sigma = std::sqrt(ordered_sum(std::move(sq)) / static_cast<double>(n));
  const double limit = mu + params.alpha * sigma;

  result.cloud.frame = cloud.frame;
  result.cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mean_dist[i] <= limit) {
      result.cloud.points.push_back(cloud.points[i]);
    } else {
      ++result.removed;
    }
  }
  return result;
}

PointCloud voxel_downsample(const PointCloud& cloud, double cell) {
  if (!(cell > 0.0)) fail(ErrorCode::kInvalidArgument, "voxel size must be positive");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    std::array<std::uint32_t, 3> rgb{};
    std::uint32_t count = 0;
    int frame_id = 0;
  };
  std::unordered_map<CellKey, std::uint32_t, CellHash> index;
  std::vector<Acc> acc;
  index.reserve(cloud.size());
  for (const CloudPoint& p : cloud.points) {
    const auto [it, inserted] =
        index.try_emplace(cell_of(p.position, cell), static_cast<std::uint32_t>(acc.size()));
    if (inserted) {
      acc.emplace_back();
      acc.back().frame_id = p.frame_id;
    }
    Acc& a = acc[it->second];
    a.sum += p.position;
    for (int c = 0; c < 3; ++c) a.rgb[c] += p.rgb[c];
    ++a.count;
  }
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(acc.size());
  for (const Acc& a : acc) {
    CloudPoint p;
    p.position = a.sum / static_cast<double>(a.count);
    for (int c = 0; c < 3; ++c) {
      p.rgb[c] = static_cast<std::uint8_t>((2 * a.rgb[c] + a.count) / (2 * a.count));
    }
    p.frame_id = a.frame_id;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace terrafuse
