#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "terrafuse/error.hpp"
#include "terrafuse/stereo.hpp"

namespace terrafuse {

std::size_t DisparityMap::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(d.begin(), d.end(), [](float v) { return v >= 0.0f; }));
}

namespace {

constexpr int kCensusRadius = 2;
constexpr std::uint8_t kMaxCost = 24;  // bits in a 5x5 census word

std::vector<std::uint32_t> census(const ImageBuffer& gray) {
  const int w = gray.width;
  const int h = gray.height;
  std::vector<std::uint32_t> out(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t c = gray.at(x, y);
      std::uint32_t bits = 0;
      for (int dy = -kCensusRadius; dy <= kCensusRadius; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -kCensusRadius; dx <= kCensusRadius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int xx = std::clamp(x + dx, 0, w - 1);
          bits = (bits << 1) | (gray.at(xx, yy) < c ? 1u : 0u);
        }
      }
      out[std::size_t(y) * w + x] = bits;
    }
  }
  return out;
}

struct Volume {
  int w, h, nd;
  std::size_t at(int x, int y, int d) const {
    return (std::size_t(y) * w + x) * nd + d;
  }
};

// Adds the path costs along direction (dx, dy) into `sum`.
void aggregate_direction(const std::vector<std::uint8_t>& cost,
                         std::vector<std::uint16_t>& sum, const Volume& vol,
                         int dx, int dy, int p1, int p2) {
  std::vector<std::uint16_t> prev(vol.nd), cur(vol.nd);
  auto walk = [&](int x, int y) {
    bool first = true;
    for (; x >= 0 && x < vol.w && y >= 0 && y < vol.h; x += dx, y += dy) {
      const std::uint8_t* c = &cost[vol.at(x, y, 0)];
      std::uint16_t* s = &sum[vol.at(x, y, 0)];
      if (first) {
        for (int d = 0; d < vol.nd; ++d) cur[d] = c[d];
        first = false;
      } else {
        const int prev_min = *std::min_element(prev.begin(), prev.end());
        const int jump = prev_min + p2;
        for (int d = 0; d < vol.nd; ++d) {
          int v = prev[d];
          if (d > 0) v = std::min(v, prev[d - 1] + p1);
          if (d + 1 < vol.nd) v = std::min(v, prev[d + 1] + p1);
          v = std::min(v, jump);
          cur[d] = static_cast<std::uint16_t>(c[d] + v - prev_min);
        }
      }
      for (int d = 0; d < vol.nd; ++d) s[d] = static_cast<std::uint16_t>(s[d] + cur[d]);
      std::swap(prev, cur);
    }
  };
  // Start at every pixel whose predecessor along the path is outside.
  for (int y = 0; y < vol.h; ++y) {
    for (int x = 0; x < vol.w; ++x) {
      const int px = x - dx;
      const int py = y - dy;
      if (px < 0 || px >= vol.w || py < 0 || py >= vol.h) walk(x, y);
    }
  }
}

// Winner with uniqueness test and parabolic refinement over a strided cost
// sequence. Returns kInvalid if ambiguous.
template <typename CostAt>
float select_disparity(int n, CostAt cost_at) {
  int best = 0;
  int best_cost = std::numeric_limits<int>::max();
  for (int d = 0; d < n; ++d) {
    const int c = cost_at(d);
    if (c < best_cost) {
      best_cost = c;
      best = d;
    }
  }
  for (int d = 0; d < n; ++d) {
    if (std::abs(d - best) >= 2 && cost_at(d) <= best_cost) {
      return DisparityMap::kInvalid;
    }
  }
  double refined = best;
  if (best > 0 && best + 1 < n) {
    const double cm = cost_at(best - 1);
    const double cp = cost_at(best + 1);
    const double denom = cm - 2.0 * best_cost + cp;
    if (denom > 0.0) refined += (cm - cp) / (2.0 * denom);
  }
  return static_cast<float>(refined);
}

}  // namespace

SgmResult sgm_match(const ImageBuffer& left, const ImageBuffer& right,
                    const SgmParams& params) {
  if (params.d_max <= 0) fail(ErrorCode::kInvalidArgument, "d_max must be positive");
  if (params.P1 < 0 || params.P2 < params.P1) {
    fail(ErrorCode::kInvalidArgument, "SGM penalties need 0 <= P1 <= P2");
  }
  if (params.P2 > 4000) fail(ErrorCode::kInvalidArgument, "P2 above 4000");
  if (params.paths != 2 && params.paths != 4 && params.paths != 8) {
    fail(ErrorCode::kInvalidArgument, "SGM paths must be 2, 4 or 8");
  }
  left.validate();
  right.validate();
  if (left.width != right.width || left.height != right.height) {
    fail(ErrorCode::kInvalidArgument, "stereo images differ in size");
  }
  const ImageBuffer gl = to_gray(left);
  const ImageBuffer gr = to_gray(right);
  const int w = gl.width;
  const int h = gl.height;
  const Volume vol{w, h, params.d_max + 1};

  const auto cl = census(gl);
  const auto cr = census(gr);
  std::vector<std::uint8_t> cost(std::size_t(w) * h * vol.nd, kMaxCost);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint32_t a = cl[std::size_t(y) * w + x];
      const int dmax = std::min(params.d_max, x);
      std::uint8_t* c = &cost[vol.at(x, y, 0)];
      for (int d = 0; d <= dmax; ++d) {
        c[d] = static_cast<std::uint8_t>(std::popcount(a ^ cr[std::size_t(y) * w + x - d]));
      }
    }
  }

  std::vector<std::uint16_t> sum(cost.size(), 0);
  static constexpr int kDirs[8][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                      {1, 1},  {-1, -1}, {-1, 1}, {1, -1}};
  for (int i = 0; i < params.paths; ++i) {
    aggregate_direction(cost, sum, vol, kDirs[i][0], kDirs[i][1], params.P1, params.P2);
  }

  SgmResult out{DisparityMap(w, h), DisparityMap(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t* s = &sum[vol.at(x, y, 0)];
      // Flat raw cost means no texture to match; aggregation would only
      // echo the image border.
      const std::uint8_t* c = &cost[vol.at(x, y, 0)];
      const int nd = std::min(vol.nd, x + 1);
      const bool flat = std::all_of(c, c + nd, [&](std::uint8_t v) { return v == c[0]; });
      out.left.at(x, y) = flat ? DisparityMap::kInvalid
                               : select_disparity(nd, [&](int d) { return int(s[d]); });
      // Right view: pixel x matches left pixel x + d.
      const int n = std::min(vol.nd, w - x);
      out.right.at(x, y) = select_disparity(
          n, [&](int d) { return int(sum[vol.at(x + d, y, d)]); });
    }
  }

  if (params.lr_check) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float& d = out.left.at(x, y);
        if (d < 0.0f) continue;
        const int xr = static_cast<int>(std::lround(x - d));
        if (xr < 0 || xr >= w || !out.right.valid(xr, y) ||
            std::abs(d - out.right.at(xr, y)) > params.lr_tolerance) {
          d = DisparityMap::kInvalid;
        }
      }
    }
  }
  return out;
}

DisparityMap sgm_disparity(const ImageBuffer& left, const ImageBuffer& right,
                           const SgmParams& params) {
  return sgm_match(left, right, params).left;
}

PointCloud triangulate(const DisparityMap& disp, const CalibrationSet& calib,
                       const ImageBuffer& left_rgb, double d_min, int frame_id) {
  const PinholeCamera& cam = calib.left_cam;
  if (disp.width != cam.width || disp.height != cam.height ||
      left_rgb.width != cam.width || left_rgb.height != cam.height) {
    fail(ErrorCode::kInvalidArgument, "disparity, image and camera sizes differ");
  }
  const double fb = cam.fx * calib.baseline;
  const int shift = left_rgb.bit_depth - 8;
  PointCloud cloud;
  cloud.frame = "camera";
  for (int v = 0; v < disp.height; ++v) {
    for (int u = 0; u < disp.width; ++u) {
      const double d = disp.at(u, v);
      if (!(d >= 0.0) || d <= d_min) continue;
      const double z = fb / d;
      CloudPoint p;
      p.position = Vec3((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
      for (int c = 0; c < 3; ++c) {
        const int ch = left_rgb.channels == 3 ? c : 0;
        p.rgb[c] = static_cast<std::uint8_t>(left_rgb.at(u, v, ch) >> shift);
      }
      p.frame_id = frame_id;
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

}  // namespace terrafuse
