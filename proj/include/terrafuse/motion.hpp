#pragma once

#include <random>
#include <span>
#include <vector>

#include "terrafuse/geomcore.hpp"

namespace terrafuse {

struct TrajectorySample {
  double t = 0.0;  // s
  RigidTransform T_world_vehicle;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;  // strictly increasing t

  bool empty() const { return samples.empty(); }
  // Throws non-monotone on repeated or decreasing timestamps.
  void validate() const;
};

struct Correspondence3D {
  Vec3 p_prev = Vec3::Zero();  // m, camera frame at the earlier instant
  Vec3 p_curr = Vec3::Zero();  // m, camera frame at the later instant
};

// Least-squares rigid transform T with T(src[i]) ~ dst[i]. Empty weights
// mean uniform. Throws insufficient-data for fewer than 3 points or
// collinear sources.
RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst,
                      std::span<const double> weights = {});

struct RansacParams {
  int iterations = 200;
  double inlier_tol = 0.02;  // m
};

struct MotionEstimate {
  RigidTransform T_curr_prev;  // maps earlier-frame coordinates to later ones
  std::size_t inliers = 0;
  std::vector<bool> inlier_mask;
};

// RANSAC over minimal 3-point Kabsch fits, then a refit on the consensus set.
MotionEstimate estimate_motion(std::span<const Correspondence3D> corrs,
                               const RansacParams& params, std::mt19937_64& rng);

// poses[0] = T0, poses[k] = compose(poses[k-1], relatives[k-1]).
std::vector<RigidTransform> accumulate(std::span<const RigidTransform> relatives,
                                       const RigidTransform& T0);

struct PoseQuery {
  RigidTransform pose;
  bool extrapolated = false;  // t outside the sampled range; pose clamped
};

// Linear translation / slerp rotation between the bracketing samples.
PoseQuery pose_at(const Trajectory& traj, double t);

}  // namespace terrafuse
