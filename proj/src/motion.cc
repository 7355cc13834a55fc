#include "terrafuse/motion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "terrafuse/error.hpp"

namespace terrafuse {

void Trajectory::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].t)) {
      fail(ErrorCode::kNonMonotone, "trajectory timestamp is not finite");
    }
    if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
      std::ostringstream msg;
      msg << "trajectory timestamps not increasing at index " << i;
      fail(ErrorCode::kNonMonotone, msg.str());
    }
  }
}

RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst,
                      std::span<const double> weights) {
  const std::size_t n = src.size();
  if (dst.size() != n || (!weights.empty() && weights.size() != n)) {
    fail(ErrorCode::kInvalidArgument, "kabsch inputs differ in length");
  }
  if (n < 3) fail(ErrorCode::kInsufficientData, "kabsch needs at least 3 points");
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w(i);
    cs += w(i) * src[i];
    cd += w(i) * dst[i];
  }
  if (!(wsum > 0.0)) fail(ErrorCode::kInsufficientData, "kabsch weights sum to zero");
  cs /= wsum;
  cd /= wsum;
  Mat3 h = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = src[i] - cs;
    h += w(i) * a * (dst[i] - cd).transpose();
    scatter += w(i) * a * a.transpose();
  }
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Mat3>(scatter).eigenvalues();
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    fail(ErrorCode::kInsufficientData, "kabsch source points are collinear");
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();
  RigidTransform t;
  t.rotation = UnitQuaternion::from_matrix(r);
  t.translation = cd - t.rotation.matrix() * cs;
  return t;
}

namespace {

std::vector<bool> inlier_set(std::span<const Correspondence3D> corrs,
                             const RigidTransform& t, double tol,
                             std::size_t& count) {
  std::vector<bool> mask(corrs.size());
  count = 0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    mask[i] = (t(corrs[i].p_prev) - corrs[i].p_curr).norm() <= tol;
    count += mask[i];
  }
  return mask;
}

RigidTransform fit_subset(std::span<const Correspondence3D> corrs,
                          const std::vector<bool>& mask) {
  std::vector<Vec3> src, dst;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) {
      src.push_back(corrs[i].p_prev);
      dst.push_back(corrs[i].p_curr);
    }
  }
  return kabsch(src, dst);
}

}  // namespace

MotionEstimate estimate_motion(std::span<const Correspondence3D> corrs,
                               const RansacParams& params, std::mt19937_64& rng) {
  const std::size_t n = corrs.size();
  if (n < 3) {
    fail(ErrorCode::kInsufficientData, "motion estimation needs at least 3 correspondences");
  }
  if (params.iterations < 1 || !(params.inlier_tol > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "RANSAC needs iterations >= 1 and a positive tolerance");
  }
  for (const auto& c : corrs) {
    if (!c.p_prev.allFinite() || !c.p_curr.allFinite()) {
      fail(ErrorCode::kInvalidArgument, "correspondence is not finite");
    }
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t best_count = 0;
  RigidTransform best;
  for (int it = 0; it < params.iterations; ++it) {
    std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
    if (i == j || j == k || i == k) continue;
    const Vec3 a = corrs[j].p_prev - corrs[i].p_prev;
    const Vec3 b = corrs[k].p_prev - corrs[i].p_prev;
    if (a.cross(b).norm() <= 1e-12 * a.norm() * b.norm()) continue;
    const std::array<Vec3, 3> src{corrs[i].p_prev, corrs[j].p_prev, corrs[k].p_prev};
    const std::array<Vec3, 3> dst{corrs[i].p_curr, corrs[j].p_curr, corrs[k].p_curr};
    const RigidTransform hyp = kabsch(src, dst);
    std::size_t count = 0;
    inlier_set(corrs, hyp, params.inlier_tol, count);
    if (count > best_count) {
      best_count = count;
      best = hyp;
    }
  }
  if (best_count < 3) {
    fail(ErrorCode::kInsufficientData, "no consensus set of at least 3 correspondences");
  }

  MotionEstimate out;
  out.inlier_mask = inlier_set(corrs, best, params.inlier_tol, out.inliers);
  for (int round = 0; round < 10; ++round) {
    out.T_curr_prev = fit_subset(corrs, out.inlier_mask);
    std::size_t count = 0;
    auto mask = inlier_set(corrs, out.T_curr_prev, params.inlier_tol, count);
    if (mask == out.inlier_mask || count < 3) break;
    out.inlier_mask = std::move(mask);
    out.inliers = count;
  }
  return out;
}

std::vector<RigidTransform> accumulate(std::span<const RigidTransform> relatives,
                                       const RigidTransform& T0) {
  std::vector<RigidTransform> poses;
  poses.reserve(relatives.size() + 1);
  poses.push_back(T0);
  for (const auto& rel : relatives) poses.push_back(compose(poses.back(), rel));
  return poses;
}

PoseQuery pose_at(const Trajectory& traj, double t) {
  if (traj.empty()) fail(ErrorCode::kEmptyTrajectory, "pose lookup on an empty trajectory");
  const auto& s = traj.samples;
  if (t <= s.front().t) return {s.front().T_world_vehicle, t < s.front().t};
  if (t >= s.back().t) return {s.back().T_world_vehicle, t > s.back().t};
  const auto hi = std::upper_bound(s.begin(), s.end(), t,
                                   [](double v, const TrajectorySample& x) { return v < x.t; });
  const auto lo = hi - 1;
  if (lo->t == t) return {lo->T_world_vehicle, false};
  const double a = (t - lo->t) / (hi->t - lo->t);
  const RigidTransform& p0 = lo->T_world_vehicle;
  const RigidTransform& p1 = hi->T_world_vehicle;
  PoseQuery q;
  q.pose.rotation = slerp(p0.rotation, p1.rotation, a);
  q.pose.translation = p0.translation + a * (p1.translation - p0.translation);
  return q;
}

}  // namespace terrafuse
