#include "terrafuse/imuproc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "terrafuse/error.hpp"

namespace terrafuse {

Vec3 gravity_compensate(const ImuSample& s, double gravity) {
  const auto c = s.orientation.coeffs();
  const double n2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3];
  if (std::abs(std::sqrt(n2) - 1.0) > UnitQuaternion::kNormTolerance) {
    fail(ErrorCode::kInvalidArgument, "IMU orientation is not unit-norm");
  }
  if (!s.accel.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "IMU acceleration is not finite");
  }
  const Vec3 g(0.0, 0.0, -gravity);
  return quat_rotate(s.orientation, s.accel) - g;
}

double rms(std::span<const double> samples) {
  if (samples.empty()) {
    fail(ErrorCode::kEmptyWindow, "RMS of an empty window");
  }
  double ss = 0.0;
  for (double x : samples) ss += x * x;
  return std::sqrt(ss / static_cast<double>(samples.size()));
}

double rms(const AccelWindow& window) { return rms(window.samples); }

AccelWindow window_for_interval(std::span<const ImuSample> stream, double t0,
                                double t1, double gravity) {
  if (!(t0 < t1)) {
    fail(ErrorCode::kInvalidArgument, "window start must precede its end");
  }
  AccelWindow w{t0, t1, {}};
  const auto first = std::lower_bound(
      stream.begin(), stream.end(), t0,
      [](const ImuSample& s, double t) { return s.t < t; });
  for (auto it = first; it != stream.end() && it->t < t1; ++it) {
    w.samples.push_back(gravity_compensate(*it, gravity).z());
  }
  if (w.samples.empty()) {
    std::ostringstream msg;
    msg << "no IMU samples in [" << t0 << ", " << t1 << ")";
    fail(ErrorCode::kEmptyWindow, msg.str());
  }
  return w;
}

void check_imu_stream(std::span<const ImuSample> stream) {
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (!std::isfinite(stream[i].t)) {
      fail(ErrorCode::kNonMonotone, "IMU timestamp is not finite");
    }
    if (i > 0 && !(stream[i].t > stream[i - 1].t)) {
      std::ostringstream msg;
      msg << "IMU timestamps not increasing at index " << i << " (t="
          << stream[i].t << ")";
      fail(ErrorCode::kNonMonotone, msg.str());
    }
  }
}

}  // namespace terrafuse
