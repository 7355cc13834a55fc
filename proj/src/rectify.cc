#include <cmath>

#include "terrafuse/error.hpp"
#include "terrafuse/stereo.hpp"

namespace terrafuse {

namespace {

bool same_intrinsics(const PinholeCamera& a, const PinholeCamera& b) {
  return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy &&
         a.width == b.width && a.height == b.height;
}

void check_size(const ImageBuffer& image, const PinholeCamera& cam,
                const char* which) {
  image.validate();
  if (image.width != cam.width || image.height != cam.height) {
    fail(ErrorCode::kInvalidArgument,
         std::string(which) + " image is " + std::to_string(image.width) + "x" +
             std::to_string(image.height) + ", calibration expects " +
             std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
}

}  // namespace

Rectifier::Rectifier(const CalibrationSet& calib) : original_(calib) {
  calib.validate();
  const PinholeCamera& l = calib.left_cam;
  const PinholeCamera& r = calib.right_cam;
  const Mat3 R_rl = calib.T_right_left.rotation.matrix();
  const Vec3 t_rl = calib.T_right_left.translation;

  identity_ = !l.has_distortion() && !r.has_distortion() &&
              same_intrinsics(l, r) && l.fx == l.fy &&
              calib.T_right_left.rotation == UnitQuaternion::identity() &&
              t_rl.y() == 0.0 && t_rl.z() == 0.0 && t_rl.x() < 0.0;
  if (identity_) {
    rectified_ = calib;
    return;
  }
  if (l.width != r.width || l.height != r.height) {
    fail(ErrorCode::kInvalidArgument, "stereo cameras differ in image size");
  }

  // Right camera center and optical axis in left coordinates.
  const Vec3 c_right = -R_rl.transpose() * t_rl;
  const Vec3 e1 = c_right.normalized();
  const Vec3 z_avg = (Vec3::UnitZ() + R_rl.transpose() * Vec3::UnitZ()).normalized();
  const Vec3 e2 = z_avg.cross(e1).normalized();
  const Vec3 e3 = e1.cross(e2);
  R_rect_left_.row(0) = e1.transpose();
  R_rect_left_.row(1) = e2.transpose();
  R_rect_left_.row(2) = e3.transpose();
  const Mat3 R_rect_right = R_rect_left_ * R_rl.transpose();

  PinholeCamera cam;
  const double f = 0.25 * (l.fx + l.fy + r.fx + r.fy);
  cam.fx = cam.fy = f;
  cam.cx = 0.5 * (l.cx + r.cx);
  cam.cy = 0.5 * (l.cy + r.cy);
  cam.width = l.width;
  cam.height = l.height;

  const double b = c_right.norm();
  const UnitQuaternion q_rect_left = UnitQuaternion::from_matrix(R_rect_left_);
  rectified_ = calib;
  rectified_.left_cam = cam;
  rectified_.right_cam = cam;
  rectified_.baseline = b;
  rectified_.T_right_left = {UnitQuaternion::identity(), Vec3(-b, 0.0, 0.0)};
  rectified_.T_vehicle_left =
      compose(calib.T_vehicle_left, RigidTransform{q_rect_left.inverse(), Vec3::Zero()});
  rectified_.T_left_thermal =
      compose(RigidTransform{q_rect_left, Vec3::Zero()}, calib.T_left_thermal);

  auto build_map = [&](const PinholeCamera& src, const Mat3& R_rect_src) {
    std::vector<float> map(std::size_t(cam.width) * cam.height * 2);
    const Mat3 R_src_rect = R_rect_src.transpose();
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const Vec3 ray((u - cam.cx) / f, (v - cam.cy) / f, 1.0);
        const auto ip = project(src, R_src_rect * ray);
        const std::size_t i = (std::size_t(v) * cam.width + u) * 2;
        if (ip && ip->in_bounds) {
          map[i] = static_cast<float>(ip->u);
          map[i + 1] = static_cast<float>(ip->v);
        } else {
          map[i] = map[i + 1] = -1.0f;
        }
      }
    }
    return map;
  };
  map_left_ = build_map(l, R_rect_left_);
  map_right_ = build_map(r, R_rect_right);
}

ImageBuffer Rectifier::warp(const ImageBuffer& image,
                            const std::vector<float>& map) const {
  ImageBuffer out(image.width, image.height, image.channels, image.bit_depth);
  for (int v = 0; v < out.height; ++v) {
    for (int u = 0; u < out.width; ++u) {
      const std::size_t i = (std::size_t(v) * out.width + u) * 2;
      if (map[i] < 0.0f) continue;
      for (int c = 0; c < out.channels; ++c) {
        out.at(u, v, c) = static_cast<std::uint16_t>(
            std::lround(sample_bilinear(image, map[i], map[i + 1], c)));
      }
    }
  }
  return out;
}

RectifiedPair Rectifier::apply(const ImageBuffer& left,
                               const ImageBuffer& right) const {
  check_size(left, original_.left_cam, "left");
  check_size(right, original_.right_cam, "right");
  if (identity_) return {left, right, rectified_};
  return {warp(left, map_left_), warp(right, map_right_), rectified_};
}

RectifiedPair rectify(const CalibrationSet& calib, const ImageBuffer& left,
                      const ImageBuffer& right) {
  return Rectifier(calib).apply(left, right);
}

}  // namespace terrafuse
