#include <cmath>
#include <numeric>
#include <set>

#include "terrafuse/fusionmap.hpp"
#include "terrafuse/spectral.hpp"
#include "terrafuse/synthgen.hpp"
#include "test_util.hpp"

namespace terrafuse {
namespace {

MapPoint pt(double x, double y, double z, Rgb rgb = {}) {
  MapPoint p;
  p.position = Vec3(x, y, z);
  p.rgb = rgb;
  return p;
}

std::vector<double> bands(double lo, double step, int n) {
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = lo + step * i;
  return b;
}

Spectrum two_level(double red, double nir) {
  Spectrum s;
  s.band_centers = bands(400, 2, 300);
  for (double nm : s.band_centers) s.values.push_back(nm < 735 ? red : nir);
  return s;
}

TEST(Ndvi, EqualBandsGiveZero) { EXPECT_EQ(ndvi(two_level(0.3, 0.3)), 0.0); }

TEST(Ndvi, HandValue) {
  EXPECT_NEAR(ndvi(0.8, 0.2), 0.6, 1e-15);
  EXPECT_NEAR(ndvi(two_level(0.2, 0.8)), 0.6, 1e-15);
}

TEST(Ndvi, GrassMaterial) {
  const Material g = grass_material();
  Spectrum s;
  s.band_centers = bands(400, 2, 300);
  for (double nm : s.band_centers) s.values.push_back(g.reflectance_at(nm));
  EXPECT_NEAR(band_mean(s, kRedBandNm), 0.21, 1e-12);
  EXPECT_NEAR(band_mean(s, kNirBandNm), 0.50, 1e-12);
  EXPECT_NEAR(ndvi(s), 0.29 / 0.71, 1e-12);
  EXPECT_NEAR(ndvi(s), 0.408, 0.001);
}

TEST(Ndvi, Errors) {
  EXPECT_TF_ERROR(ndvi(two_level(0.0, 0.0)), ErrorCode::kUndefinedNdvi);
  Spectrum vis;
  vis.band_centers = bands(400, 2, 100);
  vis.values.assign(100, 0.5);
  EXPECT_TF_ERROR(ndvi(vis), ErrorCode::kInvalidSpectrum);
  Spectrum bad = two_level(0.1, 0.2);
  bad.values.pop_back();
  EXPECT_TF_ERROR(bad.validate(), ErrorCode::kInvalidSpectrum);
}

TEST(Ndvi, BoundedAndScaleInvariant) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0), k(0.01, 100.0);
  for (int i = 0; i < 1000; ++i) {
    Spectrum s;
    s.band_centers = bands(600, 2, 120);
    for (std::size_t j = 0; j < s.band_centers.size(); ++j) s.values.push_back(u(rng));
    const double n = ndvi(s);
    EXPECT_GE(n, -1.0);
    EXPECT_LE(n, 1.0);
    const double c = k(rng);
    for (double& v : s.values) v *= c;
    EXPECT_NEAR(ndvi(s), n, 1e-12);
  }
}

TEST(FalseColor, ConstantSpectrumIsGray) {
  Spectrum s;
  s.band_centers = bands(400, 2, 300);
  s.values.assign(300, 0.4);
  const Rgb c = false_color(s);
  EXPECT_EQ(c[0], c[1]);
  EXPECT_EQ(c[1], c[2]);
  EXPECT_EQ(c[0], 255);
}

TEST(FalseColor, FirstHundredBandsOnlyIsRed) {
  Spectrum s;
  s.band_centers = bands(400, 2, 300);
  s.values.assign(300, 0.0);
  std::fill(s.values.begin(), s.values.begin() + 100, 0.7);
  EXPECT_EQ(false_color(s), (Rgb{255, 0, 0}));
}

TEST(FalseColor, RampOrdering) {
  std::vector<double> ramp(300);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const ChannelMeans m = false_color_means(ramp);
  EXPECT_DOUBLE_EQ(m.r, 49.5);
  EXPECT_DOUBLE_EQ(m.g, 149.5);
  EXPECT_DOUBLE_EQ(m.b, 249.5);
  const Rgb c = false_color(m, m.max());
  EXPECT_LT(c[0], c[1]);
  EXPECT_LT(c[1], c[2]);
  EXPECT_TF_ERROR(false_color_means(std::vector<double>(299, 1.0)), ErrorCode::kInvalidSpectrum);
}

TEST(FalseColor, LineScaledByLineMax) {
  SpectralLine line;
  line.band_centers = bands(400, 2, 300);
  line.columns = 2;
  line.values.assign(600, 0.2f);
  std::fill(line.values.begin() + 300, line.values.end(), 0.4f);
  const auto rgb = false_color_line(line);
  ASSERT_EQ(rgb.size(), 2u);
  EXPECT_EQ(rgb[1], (Rgb{255, 255, 255}));
  EXPECT_EQ(rgb[0], (Rgb{128, 128, 128}));
}

TEST(MergeCloud, IntoEmptyMapKeepsPoints) {
  MultiLayerMap map;
  PointCloud cloud;
  for (int i = 0; i < 5; ++i) cloud.points.push_back({Vec3(i, 0.5 * i, 2), {1, 2, 3}, 4});
  const RigidTransform T{UnitQuaternion::from_rotation_vector(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3)};
  merge_cloud(map, cloud, T);
  ASSERT_EQ(map.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(map.points[i].position, T(cloud.points[i].position));
    EXPECT_EQ(map.points[i].rgb, cloud.points[i].rgb);
    EXPECT_EQ(map.points[i].frame_id, 4);
  }
}

TEST(MergeCloud, TwoPointsOneCell) {
  MultiLayerMap map;
  map.cell_size = 2.0;
  map.points = {pt(0, 0, 0), pt(1, 0, 0)};
  merge_points(map, std::vector<MapPoint>{pt(0, 0, 0), pt(1, 0, 0)});
  ASSERT_EQ(map.size(), 1u);
  EXPECT_EQ(map.points[0].position, Vec3(0.5, 0, 0));
}

TEST(MergeCloud, LayersAveragedWherePresent) {
  MultiLayerMap map;
  map.cell_size = 2.0;
  map.points = {pt(0, 0, 0, {10, 20, 30}), pt(1, 0, 0, {20, 40, 61})};
  auto hot = pt(1, 0, 0, {20, 40, 60});
  hot.thermal = 100.0;
  merge_points(map, std::vector<MapPoint>{pt(0, 0, 0, {10, 20, 30}), hot});
  ASSERT_EQ(map.size(), 1u);
  EXPECT_EQ(*map.points[0].thermal, 100.0);
  EXPECT_FALSE(map.points[0].ndvi.has_value());
  EXPECT_EQ(map.points[0].rgb, (Rgb{15, 30, 45}));  // 181 / 4 rounds to 45
}

TEST(MergeCloud, OnlyTheOverlapBoxCollapses) {
  MultiLayerMap map;
  map.cell_size = 2.0;
  map.points = {pt(0, 0, 0), pt(1.5, 1.5, 1.5)};
  // New points span [0.2,1]x[0,0.2]x[0,0.2]. Neither map point lies in it.
  merge_points(map, std::vector<MapPoint>{pt(1, 0, 0), pt(0.2, 0.2, 0.2)});
  ASSERT_EQ(map.size(), 3u);
  EXPECT_EQ(map.points[0].position, Vec3(0, 0, 0));
  EXPECT_EQ(map.points[1].position, Vec3(1.5, 1.5, 1.5));
  EXPECT_NEAR((map.points[2].position - Vec3(0.6, 0.1, 0.1)).norm(), 0.0, 1e-15);
}

TEST(MergeCloud, SelfMergeAndOutsideUntouched) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    MultiLayerMap map;
    map.cell_size = 0.05;
    std::vector<MapPoint> a, b;
    for (int i = 0; i < 300; ++i) a.push_back(pt(u(rng), u(rng), u(rng), {100, 100, 100}));
    for (int i = 0; i < 300; ++i) b.push_back(pt(0.5 + u(rng), 0.3 + u(rng), u(rng)));
    map.points = a;
    Aabb overlap = bounds_of(a).intersect(bounds_of(b));
    std::size_t inside_before = 0;
    std::vector<MapPoint> outside;
    for (const auto& p : a) {
      if (overlap.contains(p.position)) {
        ++inside_before;
      } else {
        outside.push_back(p);
      }
    }
    for (const auto& p : b) inside_before += overlap.contains(p.position);
    merge_points(map, b);
    std::size_t inside_after = 0;
    for (const auto& p : map.points) inside_after += overlap.contains(p.position);
    EXPECT_LE(inside_after, inside_before);
    // Every untouched map point is still there, bit for bit.
    for (const auto& p : outside) {
      EXPECT_NE(std::find(map.points.begin(), map.points.end(), p), map.points.end());
    }
    // Self merge collapses per cell.
    MultiLayerMap self;
    self.cell_size = 0.05;
    self.points = a;
    merge_points(self, a);
    EXPECT_LE(self.size(), a.size());
  }
}

CalibrationSet thermal_rig() {
  CalibrationSet c;
  c.thermal_cam.fx = c.thermal_cam.fy = 100;
  c.thermal_cam.cx = 39.5;
  c.thermal_cam.cy = 29.5;
  c.thermal_cam.width = 80;
  c.thermal_cam.height = 60;
  c.T_left_thermal = {UnitQuaternion::from_rotation_vector(Vec3(0, 0.05, 0)), Vec3(0.05, 0, 0)};
  return c;
}

TEST(AttachThermal, UniformField) {
  const CalibrationSet c = thermal_rig();
  ImageBuffer img(80, 60, 1, 16);
  std::fill(img.pixels.begin(), img.pixels.end(), 1000);
  std::vector<MapPoint> pts{pt(0.05, 0, 2), pt(0, 0, -1)};
  EXPECT_EQ(attach_thermal(pts, img, c, {}), 1u);
  EXPECT_EQ(*pts[0].thermal, 1000.0);
  EXPECT_FALSE(pts[1].thermal.has_value());  // behind the camera
  EXPECT_TF_ERROR(attach_thermal(pts, ImageBuffer(80, 60, 1, 8), c, {}), ErrorCode::kInvalidArgument);
}

TEST(AttachThermal, NothingOutOfBounds) {
  const CalibrationSet c = thermal_rig();
  ImageBuffer img(80, 60, 1, 16);
  std::fill(img.pixels.begin(), img.pixels.end(), 7);
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-3, 3);
  const RigidTransform T_world_left{test::random_rotation(rng), Vec3(0.3, -0.2, 0.1)};
  std::vector<MapPoint> pts;
  for (int i = 0; i < 5000; ++i) pts.push_back(pt(u(rng), u(rng), u(rng)));
  attach_thermal(pts, img, c, T_world_left);
  const RigidTransform T_thermal_world = invert(compose(T_world_left, c.T_left_thermal));
  std::size_t with = 0;
  for (const auto& p : pts) {
    const auto ip = project(c.thermal_cam, T_thermal_world(p.position));
    const bool visible = ip && ip->in_bounds;
    EXPECT_EQ(p.thermal.has_value(), visible);
    with += visible;
  }
  EXPECT_GT(with, 50u);
}

WorldSpec quiet(const std::string& name) {
  WorldSpec s = scenario(name);
  s.noise.thermal_sigma = 0.0;
  s.noise.spectral_sigma = 0.0;
  s.noise.texture = false;
  s.rig.width = 160;
  s.rig.height = 120;
  s.rig.focal = 160;
  return s;
}

std::vector<MapPoint> truth_cloud(const World& world, double t, int frame, const RenderedStereo& st) {
  const PointCloud cloud = triangulate(st.truth.disparity, world.calibration(), st.left, 1.0, frame);
  return to_world(cloud, world.left_pose(t));
}

TEST(AttachThermal, PerMaterialEmissionOnGeneratedScene) {
  const World world(quiet("grass-paved"), 5);
  const double t = 9.0;  // boundary in view
  const RenderedStereo st = render_stereo(world, t, 0);
  auto pts = truth_cloud(world, t, 0, st);
  const auto hits = attach_thermal(pts, render_thermal(world, t, 0), world.calibration(), world.left_pose(t));
  ASSERT_GT(hits, 1000u);
  std::size_t ok = 0, checked = 0, per_material[2] = {0, 0};
  for (const auto& p : pts) {
    if (!p.thermal) continue;
    const int m = world.ground_material_at(p.position.x());
    ++per_material[m == 0 ? 0 : 1];
    ++checked;
    ok += std::abs(*p.thermal - world.material(m).thermal_counts) < 0.5;
  }
  EXPECT_GT(per_material[0], 100u);
  EXPECT_GT(per_material[1], 100u);
  EXPECT_GE(static_cast<double>(ok) / checked, 0.99);
}

TEST(AttachSpectra, StripAboutTwoMetresAhead) {
  const World world(quiet("uniform-grass"), 6);
  const double t = 5.0;
  const RenderedStereo st = render_stereo(world, t, 3);
  auto pts = truth_cloud(world, t, 3, st);
  const SpectralLine line = render_visnir(world, t, 0);
  const auto hits = attach_spectra(pts, line, world.calibration(), world.left_pose(t), 3);
  ASSERT_GT(hits, 50u);
  const RigidTransform T_vehicle_world = invert(world.vehicle_pose(t));
  std::set<int> columns;
  for (const auto& p : pts) {
    if (!p.spectrum_ref) {
      EXPECT_FALSE(p.ndvi.has_value());
      continue;
    }
    const Vec3 v = T_vehicle_world(p.position);
    EXPECT_NEAR(v.x(), 2.0, 0.1);
    EXPECT_EQ(spectrum_ref_frame(*p.spectrum_ref), 3);
    columns.insert(spectrum_ref_column(*p.spectrum_ref));
    EXPECT_NEAR(*p.ndvi, 0.29 / 0.71, 1e-6);
  }
  // Contiguous run of scan columns.
  EXPECT_EQ(*columns.rbegin() - *columns.begin() + 1, static_cast<int>(columns.size()));
  EXPECT_EQ(static_cast<int>(columns.size()), line.columns);
}

TEST(AttachSpectra, NoPointsNoSpectra) {
  const World world(quiet("uniform-grass"), 6);
  std::vector<MapPoint> none;
  EXPECT_EQ(attach_spectra(none, render_visnir(world, 1.0, 0), world.calibration(), world.left_pose(1.0), 0), 0u);
  // Points far from the line get nothing.
  std::vector<MapPoint> far{pt(0, 0, 100)};
  EXPECT_EQ(attach_spectra(far, render_visnir(world, 1.0, 0), world.calibration(), world.left_pose(1.0), 0), 0u);
}

TEST(SpectrumRef, RoundTrip) {
  const auto r = make_spectrum_ref(123456, 31);
  EXPECT_EQ(spectrum_ref_frame(r), 123456);
  EXPECT_EQ(spectrum_ref_column(r), 31);
}

TEST(ScanlineColumn, CoversImage) {
  EXPECT_EQ(scanline_column(0.0, 320, 32), 0);
  EXPECT_EQ(scanline_column(319.0, 320, 32), 31);
  EXPECT_EQ(scanline_column(15.0, 320, 32), 1);  // (15.5 * 32 / 320) - 0.5 = 1.05
  EXPECT_EQ(scanline_column(-10.0, 320, 32), 0);
}

}  // namespace
}  // namespace terrafuse
