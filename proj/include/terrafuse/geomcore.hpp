#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace terrafuse {

// Frame conventions used throughout the library:
//   camera  : x right, y down, z forward (optical axis)
//   vehicle : x forward, y left, z up; origin on the ground below the front
//             axle
//   world   : fixed frame, z up
// A transform named T_a_b maps coordinates expressed in frame b into frame a.

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rotation stored as (w, x, y, z). Construction normalizes the input but
// rejects anything whose norm is off by more than kNormTolerance: a badly
// scaled quaternion in a log is corruption, not rounding.
class UnitQuaternion {
 public:
  static constexpr double kNormTolerance = 1e-6;

  UnitQuaternion() = default;
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);
  // Exponential map of a rotation vector (axis * angle).
  static UnitQuaternion from_rotation_vector(const Vec3& rotation_vector);
  static UnitQuaternion from_matrix(const Mat3& rotation);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  std::array<double, 4> coeffs() const { return {w_, x_, y_, z_}; }

  UnitQuaternion inverse() const;
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;
  Mat3 matrix() const;
  // Logarithm map; the returned angle lies in [0, pi].
  Vec3 rotation_vector() const;

  bool operator==(const UnitQuaternion&) const = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

// q (0, v) q^-1, vector part.
Vec3 quat_rotate(const UnitQuaternion& q, const Vec3& v);

// Rotation angle of a^-1 b, in [0, pi].
double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b);

// Shortest-arc spherical interpolation, s in [0, 1].
UnitQuaternion slerp(const UnitQuaternion& a, const UnitQuaternion& b, double s);

struct RigidTransform {
  UnitQuaternion rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 operator()(const Vec3& p) const {
    return quat_rotate(rotation, p) + translation;
  }
  Eigen::Matrix4d matrix() const;

  bool operator==(const RigidTransform&) const = default;
};

// compose(a, b)(p) == a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

// Brown-Conrady pinhole model (k1, k2 radial; p1, p2 tangential).
struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  int width = 1;
  int height = 1;

  // Throws invalid-argument when fx, fy <= 0 or the principal point lies
  // outside the image.
  void validate() const;
  bool has_distortion() const {
    return k1 != 0.0 || k2 != 0.0 || p1 != 0.0 || p2 != 0.0;
  }
  bool in_bounds(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width - 1.0 && v <= height - 1.0;
  }

  bool operator==(const PinholeCamera&) const = default;
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  bool in_bounds = false;
};

// Distortion applied to normalized image coordinates (x/z, y/z).
Vec2 distort_normalized(const PinholeCamera& cam, const Vec2& xy);
// Inverse of distort_normalized by fixed-point iteration.
Vec2 undistort_normalized(const PinholeCamera& cam, const Vec2& distorted);

// Empty when the point is on or behind the image plane (z <= 0).
std::optional<ImagePoint> project(const PinholeCamera& cam, const Vec3& p_cam);

// Camera-frame point at depth z for pixel (u, v), distortion removed.
Vec3 back_project(const PinholeCamera& cam, double u, double v, double depth);

}  // namespace terrafuse
