#include "terrafuse/calib.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "terrafuse/error.hpp"

namespace terrafuse {

void ScanLine::validate(int image_width, int image_height) const {
  if (band_count != static_cast<int>(band_centers.size())) {
    fail(ErrorCode::kInvalidArgument,
         "scan line band_count does not match band_centers");
  }
  for (std::size_t i = 1; i < band_centers.size(); ++i) {
    if (!(band_centers[i] > band_centers[i - 1])) {
      fail(ErrorCode::kInvalidArgument,
           "scan line band centers must be strictly increasing");
    }
  }
  const double v0 = v_at(0.0);
  const double v1 = v_at(image_width - 1.0);
  const double lo = std::min(v0, v1);
  const double hi = std::max(v0, v1);
  if (!std::isfinite(lo) || hi < 0.0 || lo > image_height - 1.0) {
    fail(ErrorCode::kInvalidArgument, "scan line does not cross the image");
  }
}

void CalibrationSet::validate() const {
  left_cam.validate();
  right_cam.validate();
  thermal_cam.validate();
  if (!(baseline > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "baseline must be positive");
  }
  const double t_norm = T_right_left.translation.norm();
  if (std::abs(t_norm - baseline) > 1e-9) {
    std::ostringstream msg;
    msg << "baseline " << baseline
        << " differs from the stereo extrinsic translation norm " << t_norm;
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  scanline.validate(left_cam.width, left_cam.height);
}

namespace {

using nlohmann::json;

json camera_to_json(const PinholeCamera& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"k1", c.k1}, {"k2", c.k2}, {"p1", c.p1}, {"p2", c.p2},
          {"width", c.width}, {"height", c.height}};
}

PinholeCamera camera_from_json(const json& j) {
  PinholeCamera c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.k1 = j.at("k1").get<double>();
  c.k2 = j.at("k2").get<double>();
  c.p1 = j.at("p1").get<double>();
  c.p2 = j.at("p2").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  return c;
}

}  // namespace

json transform_to_json(const RigidTransform& t) {
  const auto& q = t.rotation;
  return {{"rotation", {{"w", q.w()}, {"x", q.x()}, {"y", q.y()}, {"z", q.z()}}},
          {"translation",
           {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const json& j) {
  const json& r = j.at("rotation");
  const json& p = j.at("translation");
  if (!p.is_array() || p.size() != 3) {
    fail(ErrorCode::kBadSchema, "translation must be a 3-element array");
  }
  RigidTransform t;
  t.rotation = UnitQuaternion(r.at("w").get<double>(), r.at("x").get<double>(),
                              r.at("y").get<double>(), r.at("z").get<double>());
  t.translation = Vec3(p[0].get<double>(), p[1].get<double>(),
                       p[2].get<double>());
  return t;
}

json calibration_to_json(const CalibrationSet& c) {
  json j;
  j["format"] = kCalibFormat;
  j["units"] = {{"length", "m"}, {"pixel", "px"}, {"wavelength", "nm"}};
  j["left_cam"] = camera_to_json(c.left_cam);
  j["right_cam"] = camera_to_json(c.right_cam);
  j["thermal_cam"] = camera_to_json(c.thermal_cam);
  j["T_right_left"] = transform_to_json(c.T_right_left);
  j["T_vehicle_left"] = transform_to_json(c.T_vehicle_left);
  j["T_left_thermal"] = transform_to_json(c.T_left_thermal);
  j["scanline"] = {{"slope", c.scanline.slope},
                   {"intercept", c.scanline.intercept},
                   {"band_count", c.scanline.band_count},
                   {"band_centers", c.scanline.band_centers}};
  j["baseline"] = c.baseline;
  return j;
}

CalibrationSet calibration_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kCalibFormat) {
      fail(ErrorCode::kBadSchema, "unsupported calibration format '" +
                                      j.at("format").get<std::string>() + "'");
    }
    CalibrationSet c;
    c.left_cam = camera_from_json(j.at("left_cam"));
    c.right_cam = camera_from_json(j.at("right_cam"));
    c.thermal_cam = camera_from_json(j.at("thermal_cam"));
    c.T_right_left = transform_from_json(j.at("T_right_left"));
    c.T_vehicle_left = transform_from_json(j.at("T_vehicle_left"));
    c.T_left_thermal = transform_from_json(j.at("T_left_thermal"));
    const json& s = j.at("scanline");
    c.scanline.slope = s.at("slope").get<double>();
    c.scanline.intercept = s.at("intercept").get<double>();
    c.scanline.band_count = s.at("band_count").get<int>();
    c.scanline.band_centers = s.at("band_centers").get<std::vector<double>>();
    c.baseline = j.at("baseline").get<double>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadSchema, std::string("calibration: ") + e.what());
  }
}

void save_calibration(const CalibrationSet& calib,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << calibration_to_json(calib).dump(2) << '\n';
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

CalibrationSet load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::kBadSchema, path.string() + ": " + e.what());
  }
  return calibration_from_json(j);
}

// ---------------------------------------------------------------------------
// Pose estimation

namespace {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

// Similarity that centers points and scales their mean distance to sqrt(2)
// (2D) or sqrt(3) (3D).
template <int N>
Eigen::Matrix<double, N + 1, N + 1> normalizing_transform(
    const std::vector<Eigen::Matrix<double, N, 1>>& pts) {
  Eigen::Matrix<double, N, 1> c = Eigen::Matrix<double, N, 1>::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(double(N)) / mean_dist : 1.0;
  Eigen::Matrix<double, N + 1, N + 1> t =
      Eigen::Matrix<double, N + 1, N + 1>::Identity();
  t.template topLeftCorner<N, N>() *= s;
  t.template topRightCorner<N, 1>() = -s * c;
  return t;
}

RigidTransform init_from_dlt(const std::vector<Vec3>& X,
                             const std::vector<Vec2>& x) {
  const auto tx = normalizing_transform<3>(X);
  const auto tu = normalizing_transform<2>(x);
  const std::size_t n = X.size();
  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d p = tx * X[i].homogeneous();
    const Eigen::Vector3d q = tu * x[i].homogeneous();
    a.row(2 * i) << p.transpose(), Eigen::RowVector4d::Zero(),
        -q.x() * p.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), p.transpose(),
        -q.y() * p.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Mat34 pn;
  pn << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(),
      h.segment<4>(8).transpose();
  Mat34 p = tu.inverse() * pn * tx;
  Mat3 m = p.leftCols<3>();
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  Eigen::JacobiSVD<Mat3> msvd(m);
  const double scale = msvd.singularValues().mean();
  RigidTransform t;
  t.rotation = UnitQuaternion::from_matrix(nearest_rotation(m / scale));
  t.translation = p.col(3) / scale;
  return t;
}

RigidTransform init_from_homography(const std::vector<Vec3>& X,
                                    const std::vector<Vec2>& x,
                                    const Vec3& centroid, const Mat3& basis) {
  const std::size_t n = X.size();
  std::vector<Vec2> plane(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 local = basis.transpose() * (X[i] - centroid);
    plane[i] = local.head<2>();
  }
  const auto ta = normalizing_transform<2>(plane);
  const auto tu = normalizing_transform<2>(x);
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = ta * plane[i].homogeneous();
    const Vec3 q = tu * x[i].homogeneous();
    a.row(2 * i) << p.transpose(), Eigen::RowVector3d::Zero(),
        -q.x() * p.transpose();
    a.row(2 * i + 1) << Eigen::RowVector3d::Zero(), p.transpose(),
        -q.y() * p.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(),
      h.segment<3>(6).transpose();
  Mat3 hm = tu.inverse() * hn * ta;
  const double lambda = 2.0 / (hm.col(0).norm() + hm.col(1).norm());
  hm *= lambda;
  if (hm(2, 2) < 0.0) hm = -hm;  // pattern origin in front of the camera
  Mat3 r;
  r.col(0) = hm.col(0);
  r.col(1) = hm.col(1);
  r.col(2) = hm.col(0).cross(hm.col(1));
  const Mat3 r_cam_plane = nearest_rotation(r);
  const Mat3 rot = r_cam_plane * basis.transpose();
  RigidTransform t;
  t.rotation = UnitQuaternion::from_matrix(rot);
  t.translation = hm.col(2) - rot * centroid;
  return t;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Pixel projection of a camera-frame point and its Jacobian with respect to
// that point. Returns false for points on or behind the image plane.
bool project_jacobian(const PinholeCamera& cam, const Vec3& p, Vec2& uv,
                      Eigen::Matrix<double, 2, 3>* jac) {
  if (!(p.z() > 1e-12)) return false;
  const double iz = 1.0 / p.z();
  const double x = p.x() * iz;
  const double y = p.y() * iz;
  const double r2 = x * x + y * y;
  const double radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
  const double xd = x * radial + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2 * x * x);
  const double yd = y * radial + cam.p1 * (r2 + 2 * y * y) + 2.0 * cam.p2 * x * y;
  uv = Vec2(cam.fx * xd + cam.cx, cam.fy * yd + cam.cy);
  if (jac != nullptr) {
    const double drad = cam.k1 + 2.0 * cam.k2 * r2;  // d radial / d r2
    Eigen::Matrix2d dd;  // d(xd, yd) / d(x, y)
    dd(0, 0) = radial + 2 * x * x * drad + 2 * cam.p1 * y + 6 * cam.p2 * x;
    dd(0, 1) = 2 * x * y * drad + 2 * cam.p1 * x + 2 * cam.p2 * y;
    dd(1, 0) = 2 * x * y * drad + 2 * cam.p1 * x + 2 * cam.p2 * y;
    dd(1, 1) = radial + 2 * y * y * drad + 6 * cam.p1 * y + 2 * cam.p2 * x;
    Eigen::Matrix<double, 2, 3> dn;  // d(x, y) / d p
    dn << iz, 0.0, -x * iz, 0.0, iz, -y * iz;
    Eigen::Matrix2d f = Eigen::Matrix2d::Zero();
    f(0, 0) = cam.fx;
    f(1, 1) = cam.fy;
    *jac = f * dd * dn;
  }
  return true;
}

double reprojection_cost(const std::vector<Vec3>& X, const std::vector<Vec2>& obs,
                         const PinholeCamera& cam, const Mat3& r,
                         const Vec3& t) {
  double cost = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    Vec2 uv;
    if (!project_jacobian(cam, r * X[i] + t, uv, nullptr)) {
      return std::numeric_limits<double>::infinity();
    }
    cost += (uv - obs[i]).squaredNorm();
  }
  return cost;
}

}  // namespace

PoseEstimate estimate_pose(std::span<const PatternObservation> observations,
                           const PinholeCamera& cam,
                           const PoseRefineOptions& options) {
  const std::size_t n = observations.size();
  if (n < 6) {
    fail(ErrorCode::kInsufficientData,
         "pose estimation needs at least 6 correspondences, got " +
             std::to_string(n));
  }
  cam.validate();

  std::vector<Vec3> X(n);
  std::vector<Vec2> pix(n);
  std::vector<Vec2> normalized(n);
  for (std::size_t i = 0; i < n; ++i) {
    X[i] = observations[i].pattern_point;
    pix[i] = observations[i].pixel;
    const Vec2 d((pix[i].x() - cam.cx) / cam.fx, (pix[i].y() - cam.cy) / cam.fy);
    normalized[i] = undistort_normalized(cam, d);
  }

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : X) centroid += p;
  centroid /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : X) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  if (!(ev(1) > 0.0)) {
    fail(ErrorCode::kInsufficientData, "pattern points are collinear");
  }
  const bool planar = ev(0) <= 1e-4 * ev(2);

  RigidTransform init;
  if (planar) {
    Mat3 basis;
    basis.col(0) = eig.eigenvectors().col(2);
    basis.col(1) = eig.eigenvectors().col(1);
    basis.col(2) = basis.col(0).cross(basis.col(1));
    init = init_from_homography(X, normalized, centroid, basis);
  } else {
    init = init_from_dlt(X, normalized);
  }

  Mat3 r = init.rotation.matrix();
  Vec3 t = init.translation;
  double cost = reprojection_cost(X, pix, cam, r, t);
  if (!std::isfinite(cost)) {
    fail(ErrorCode::kNoConvergence,
         "initial pose places pattern points behind the camera");
  }

  PoseEstimate result;
  result.cost_history.push_back(cost);
  double lambda = 1e-3;
  bool converged = cost == 0.0;
  int iter = 0;
  Eigen::MatrixXd jac(2 * n, 6);
  Eigen::VectorXd res(2 * n);
  while (!converged && iter < options.max_iterations) {
    ++iter;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 rx = r * X[i];
      Vec2 uv;
      Eigen::Matrix<double, 2, 3> jp;
      project_jacobian(cam, rx + t, uv, &jp);
      res.segment<2>(2 * i) = uv - pix[i];
      jac.block<2, 3>(2 * i, 0) = -jp * skew(rx);
      jac.block<2, 3>(2 * i, 3) = jp;
    }
    const Mat6 jtj = jac.transpose() * jac;
    const Vec6 jtr = jac.transpose() * res;

    bool accepted = false;
    Vec6 step = Vec6::Zero();
    while (lambda < 1e16) {
      Mat6 a = jtj;
      for (int k = 0; k < 6; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      step = -a.ldlt().solve(jtr);
      const Mat3 r_new = nearest_rotation(
          UnitQuaternion::from_rotation_vector(step.head<3>()).matrix() * r);
      const Vec3 t_new = t + step.tail<3>();
      const double cost_new = reprojection_cost(X, pix, cam, r_new, t_new);
      if (cost_new < cost) {
        r = r_new;
        t = t_new;
        cost = cost_new;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    // No descent direction left: we sit at a minimum to machine precision.
    if (!accepted || step.norm() < options.step_tolerance || cost == 0.0) {
      converged = true;
    }
  }
  result.iterations = iter;
  result.rms_px = std::sqrt(cost / static_cast<double>(n));
  if (!converged) {
    std::ostringstream msg;
    msg << "pose refinement did not converge in " << options.max_iterations
        << " iterations (rms reprojection " << result.rms_px << " px)";
    fail(ErrorCode::kNoConvergence, msg.str());
  }
  result.T_cam_pattern.rotation = UnitQuaternion::from_matrix(r);
  result.T_cam_pattern.translation = t;
  return result;
}

RigidTransform chain_extrinsics(const RigidTransform& T_a_pattern,
                                const RigidTransform& T_b_pattern) {
  return compose(T_a_pattern, invert(T_b_pattern));
}

RigidTransform average_transforms(std::span<const RigidTransform> transforms) {
  if (transforms.empty()) {
    fail(ErrorCode::kInsufficientData, "no transforms to average");
  }
  const auto ref = transforms.front().rotation.coeffs();
  Eigen::Vector4d q_sum = Eigen::Vector4d::Zero();
  Vec3 t_sum = Vec3::Zero();
  for (const auto& t : transforms) {
    const auto c = t.rotation.coeffs();
    const double dot = c[0] * ref[0] + c[1] * ref[1] + c[2] * ref[2] + c[3] * ref[3];
    const double sign = dot < 0.0 ? -1.0 : 1.0;
    q_sum += sign * Eigen::Vector4d(c[0], c[1], c[2], c[3]);
    t_sum += t.translation;
  }
  q_sum.normalize();
  RigidTransform avg;
  avg.rotation = UnitQuaternion(q_sum(0), q_sum(1), q_sum(2), q_sum(3));
  avg.translation = t_sum / static_cast<double>(transforms.size());
  return avg;
}

RigidTransform chain_extrinsics(std::span<const RigidTransform> T_a_patterns,
                                std::span<const RigidTransform> T_b_patterns) {
  if (T_a_patterns.size() != T_b_patterns.size()) {
    fail(ErrorCode::kInvalidArgument, "view lists differ in length");
  }
  std::vector<RigidTransform> per_view;
  per_view.reserve(T_a_patterns.size());
  for (std::size_t i = 0; i < T_a_patterns.size(); ++i) {
    per_view.push_back(chain_extrinsics(T_a_patterns[i], T_b_patterns[i]));
  }
  return average_transforms(per_view);
}

ScanLineFit fit_scanline(std::span<const Vec2> points) {
  if (points.size() < 2) {
    fail(ErrorCode::kInsufficientData, "scan line fit needs at least 2 points");
  }
  Vec2 c = Vec2::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0, max_du = 0.0;
  for (const auto& p : points) {
    const Vec2 d = p - c;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
    max_du = std::max(max_du, std::abs(d.x()));
  }
  if (max_du == 0.0) {
    fail(ErrorCode::kVerticalLine, "all scan line points share one column");
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const Vec2 dir(std::cos(theta), std::sin(theta));
  if (std::abs(dir.x()) < 1e-12) {
    fail(ErrorCode::kVerticalLine, "fitted scan line is vertical");
  }
  ScanLineFit fit;
  fit.slope = dir.y() / dir.x();
  fit.intercept = c.y() - fit.slope * c.x();
  const Vec2 normal(-dir.y(), dir.x());
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = normal.dot(p - c);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

}  // namespace terrafuse
