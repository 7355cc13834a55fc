#include "terrafuse/geomcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "terrafuse/error.hpp"

namespace terrafuse {

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << "quaternion norm " << norm << " deviates from 1 by more than "
        << kNormTolerance;
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  w_ = w / norm;
  x_ = x / norm;
  y_ = y / norm;
  z_ = z / norm;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis,
                                               double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "rotation axis has zero length");
  }
  const Vec3 a = axis / n;
  const double s = std::sin(0.5 * angle_rad);
  return {std::cos(0.5 * angle_rad), a.x() * s, a.y() * s, a.z() * s};
}

UnitQuaternion UnitQuaternion::from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    // Second-order expansion keeps the result unit-norm to rounding.
    const Vec3 h = 0.5 * rv;
    const double w = 1.0 - 0.5 * h.squaredNorm();
    return {w, h.x(), h.y(), h.z()};
  }
  return from_axis_angle(rv / angle, angle);
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& rotation) {
  const Eigen::Quaterniond q(rotation);
  const double n = q.norm();
  return {q.w() / n, q.x() / n, q.y() / n, q.z() / n};
}

UnitQuaternion UnitQuaternion::inverse() const {
  UnitQuaternion q = *this;
  q.x_ = -x_;
  q.y_ = -y_;
  q.z_ = -z_;
  return q;
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& r) const {
  return {w_ * r.w_ - x_ * r.x_ - y_ * r.y_ - z_ * r.z_,
          w_ * r.x_ + x_ * r.w_ + y_ * r.z_ - z_ * r.y_,
          w_ * r.y_ - x_ * r.z_ + y_ * r.w_ + z_ * r.x_,
          w_ * r.z_ + x_ * r.y_ - y_ * r.x_ + z_ * r.w_};
}

Mat3 UnitQuaternion::matrix() const {
  Mat3 m;
  const double ww = w_ * w_, xx = x_ * x_, yy = y_ * y_, zz = z_ * z_;
  const double xy = x_ * y_, xz = x_ * z_, yz = y_ * z_;
  const double wx = w_ * x_, wy = w_ * y_, wz = w_ * z_;
  m << ww + xx - yy - zz, 2 * (xy - wz), 2 * (xz + wy),
       2 * (xy + wz), ww - xx + yy - zz, 2 * (yz - wx),
       2 * (xz - wy), 2 * (yz + wx), ww - xx - yy + zz;
  return m;
}

Vec3 UnitQuaternion::rotation_vector() const {
  // Use the hemisphere with w >= 0 so the angle is at most pi.
  const double sign = w_ < 0.0 ? -1.0 : 1.0;
  const Vec3 v(sign * x_, sign * y_, sign * z_);
  const double s = v.norm();
  const double w = sign * w_;
  if (s < 1e-12) {
    return 2.0 * v;
  }
  const double angle = 2.0 * std::atan2(s, w);
  return v * (angle / s);
}

Vec3 quat_rotate(const UnitQuaternion& q, const Vec3& v) {
  const Vec3 u(q.x(), q.y(), q.z());
  const Vec3 t = 2.0 * u.cross(v);
  return v + q.w() * t + u.cross(t);
}

double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  return (a.inverse() * b).rotation_vector().norm();
}

UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b,
                     double s) {
  if (s <= 0.0) return a;
  if (s >= 1.0) return b;
  UnitQuaternion delta = a.inverse() * b;
  // The log map already picks the short arc.
  const Vec3 rv = delta.rotation_vector();
  return a * UnitQuaternion::from_rotation_vector(s * rv);
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a(b.translation)};
}

RigidTransform invert(const RigidTransform& t) {
  const UnitQuaternion r = t.rotation.inverse();
  return {r, -quat_rotate(r, t.translation)};
}

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    fail(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    fail(ErrorCode::kInvalidArgument, "principal point outside the image");
  }
}

Vec2 distort_normalized(const PinholeCamera& cam, const Vec2& xy) {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
  return {x * radial + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x),
          y * radial + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y};
}

Vec2 undistort_normalized(const PinholeCamera& cam, const Vec2& distorted) {
  if (!cam.has_distortion()) return distorted;
  Vec2 xy = distorted;
  for (int i = 0; i < 50; ++i) {
    const Vec2 err = distort_normalized(cam, xy) - distorted;
    xy -= err;
    if (err.squaredNorm() < 1e-30) break;
  }
  return xy;
}

std::optional<ImagePoint> project(const PinholeCamera& cam, const Vec3& p) {
  if (!(p.z() > 0.0)) return std::nullopt;
  Vec2 xy(p.x() / p.z(), p.y() / p.z());
  if (cam.has_distortion()) xy = distort_normalized(cam, xy);
  ImagePoint ip;
  ip.u = cam.fx * xy.x() + cam.cx;
  ip.v = cam.fy * xy.y() + cam.cy;
  ip.in_bounds = cam.in_bounds(ip.u, ip.v);
  return ip;
}

Vec3 back_project(const PinholeCamera& cam, double u, double v, double depth) {
  Vec2 xy((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy);
  xy = undistort_normalized(cam, xy);
  return {xy.x() * depth, xy.y() * depth, depth};
}

}  // namespace terrafuse
