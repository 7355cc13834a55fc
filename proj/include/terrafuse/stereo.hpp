#pragma once

#include <vector>

#include "terrafuse/calib.hpp"
#include "terrafuse/image.hpp"
#include "terrafuse/pointcloud.hpp"

namespace terrafuse {

struct RectifiedPair {
  ImageBuffer left;
  ImageBuffer right;
  // Shared distortion-free intrinsics, T_right_left = (I, (-b, 0, 0)), and the
  // other extrinsics re-expressed relative to the rectified left camera.
  CalibrationSet calib;
};

// Precomputed rectification warp for one calibration. Pairs that are already
// rectified pass through untouched.
class Rectifier {
 public:
  explicit Rectifier(const CalibrationSet& calib);

  const CalibrationSet& rectified_calib() const { return rectified_; }
  bool is_identity() const { return identity_; }
  // Rotation taking original left-camera coordinates to rectified ones.
  const Mat3& R_rect_left() const { return R_rect_left_; }

  RectifiedPair apply(const ImageBuffer& left, const ImageBuffer& right) const;

 private:
  ImageBuffer warp(const ImageBuffer& image, const std::vector<float>& map) const;

  CalibrationSet original_;
  CalibrationSet rectified_;
  Mat3 R_rect_left_ = Mat3::Identity();
  bool identity_ = false;
  std::vector<float> map_left_;   // source (u, v) per rectified pixel
  std::vector<float> map_right_;
};

RectifiedPair rectify(const CalibrationSet& calib, const ImageBuffer& left,
                      const ImageBuffer& right);

struct DisparityMap {
  static constexpr float kInvalid = -1.0f;

  int width = 0;
  int height = 0;
  std::vector<float> d;  // px

  DisparityMap() = default;
  DisparityMap(int w, int h) : width(w), height(h), d(std::size_t(w) * h, kInvalid) {}

  float at(int x, int y) const { return d[std::size_t(y) * width + x]; }
  float& at(int x, int y) { return d[std::size_t(y) * width + x]; }
  bool valid(int x, int y) const { return at(x, y) >= 0.0f; }
  std::size_t valid_count() const;
};

struct SgmParams {
  int d_max = 128;
  int P1 = 10;
  int P2 = 120;  // at most 4000
  int paths = 8;  // 2, 4 or 8
  bool lr_check = true;
  double lr_tolerance = 1.0;  // px
};

struct SgmResult {
  DisparityMap left;   // checked against `right` when lr_check is on
  DisparityMap right;  // derived from the same aggregated volume
};

// Census (5x5) matching cost with semi-global aggregation, winner-take-all
// with a uniqueness test, parabolic sub-pixel refinement and optional
// left-right consistency check.
SgmResult sgm_match(const ImageBuffer& left, const ImageBuffer& right,
                    const SgmParams& params = {});
DisparityMap sgm_disparity(const ImageBuffer& left, const ImageBuffer& right,
                           const SgmParams& params = {});

// Camera-frame points for every valid disparity d > d_min, Z = f b / d,
// colored from the (rectified) left image.
PointCloud triangulate(const DisparityMap& disparity,
                       const CalibrationSet& rectified_calib,
                       const ImageBuffer& left_rgb, double d_min = 1.0,
                       int frame_id = 0);

}  // namespace terrafuse
