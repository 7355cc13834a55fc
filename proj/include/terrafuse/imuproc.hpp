#pragma once

#include <span>
#include <vector>

#include "terrafuse/geomcore.hpp"

namespace terrafuse {

inline constexpr double kGravity = 9.81;  // m/s^2

struct ImuSample {
  double t = 0.0;             // s
  Vec3 accel = Vec3::Zero();  // m/s^2, sensor frame
  UnitQuaternion orientation;  // sensor -> Earth
};

// Earth-frame vertical dynamic acceleration over [t_start, t_end).
struct AccelWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<double> samples;  // m/s^2
};

// Rotates the reading into the Earth frame and removes gravity
// g = (0, 0, -gravity). A resting sensor yields zero.
Vec3 gravity_compensate(const ImuSample& sample, double gravity = kGravity);

double rms(const AccelWindow& window);
double rms(std::span<const double> samples);

// Samples with t0 <= t < t1, in stream order.
AccelWindow window_for_interval(std::span<const ImuSample> stream, double t0,
                                double t1, double gravity = kGravity);

// Throws non-monotone unless timestamps strictly increase and are finite.
void check_imu_stream(std::span<const ImuSample> stream);

}  // namespace terrafuse
