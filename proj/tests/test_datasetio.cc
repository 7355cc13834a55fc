#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "terrafuse/dataset.hpp"
#include "terrafuse/exports.hpp"
#include "terrafuse/netpbm.hpp"
#include "terrafuse/synthgen.hpp"
#include "test_util.hpp"

namespace terrafuse {
namespace {

namespace fs = std::filesystem;
using test::TempDir;

ImageBuffer random_image(int w, int h, int channels, int depth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, (1 << depth) - 1);
  ImageBuffer img(w, h, channels, depth);
  for (auto& p : img.pixels) p = static_cast<std::uint16_t>(u(rng));
  return img;
}

TEST(Netpbm, RoundTrips) {
  TempDir dir("netpbm");
  for (const auto& img : {random_image(7, 5, 1, 8, 1), random_image(7, 5, 1, 16, 2), random_image(4, 9, 3, 8, 3)}) {
    const fs::path p = dir / (img.channels == 3 ? "a.ppm" : "a.pgm");
    write_netpbm(img, p);
    EXPECT_EQ(read_netpbm(p), img);
  }
}

TEST(Netpbm, SixteenBitIsBigEndian) {
  TempDir dir("netpbm16");
  ImageBuffer img(2, 1, 1, 16);
  img.at(0, 0) = 0x1234;
  img.at(1, 0) = 0xABCD;
  write_netpbm(img, dir / "t.pgm");
  const std::string bytes = test::slurp(dir / "t.pgm");
  EXPECT_EQ(bytes.rfind("P5", 0), 0u);
  const std::string raster = bytes.substr(bytes.size() - 4);
  EXPECT_EQ(raster, std::string("\x12\x34\xAB\xCD", 4));
  EXPECT_NE(bytes.find("65535"), std::string::npos);
}

TEST(Netpbm, Errors) {
  TempDir dir("netpbmerr");
  EXPECT_TF_ERROR(read_netpbm(dir / "none.pgm"), ErrorCode::kMissingPayload);
  std::ofstream(dir / "p2.pgm") << "P2\n1 1\n255\n0\n";
  EXPECT_TF_ERROR(read_netpbm(dir / "p2.pgm"), ErrorCode::kParseError);
  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\n" << std::string(3, 'x');
  EXPECT_TF_ERROR(read_netpbm(dir / "short.pgm"), ErrorCode::kParseError);
  EXPECT_TF_ERROR(write_netpbm(ImageBuffer(1, 1, 1, 8), dir / "no/such/dir/x.pgm"), ErrorCode::kIoError);
}

CalibrationSet small_calib() {
  CalibrationSet c;
  for (PinholeCamera* cam : {&c.left_cam, &c.right_cam, &c.thermal_cam}) {
    cam->fx = cam->fy = 8;
    cam->cx = 3.5;
    cam->cy = 2.5;
    cam->width = 8;
    cam->height = 6;
  }
  c.T_right_left = {{}, Vec3(-0.04, 0, 0)};
  c.baseline = 0.04;
  c.scanline.intercept = 3;
  c.scanline.band_centers = {660, 670, 680, 790, 800, 810};
  c.scanline.band_count = 6;
  return c;
}

SpectralLine small_line(float v) {
  SpectralLine l;
  l.band_centers = small_calib().scanline.band_centers;
  l.columns = 2;
  l.values.assign(12, v);
  return l;
}

// Stereo 7.5 Hz, thermal 15 Hz, VIS-NIR and IMU 128 Hz for `seconds`.
DatasetCounts write_small(const fs::path& root, double seconds, double thermal_gap_at = -1) {
  DatasetWriter w(root, small_calib(), small_calib().scanline.band_centers, 2);
  for (int k = 0; k / 7.5 < seconds; ++k) {
    w.add_stereo(k / 7.5, random_image(8, 6, 3, 8, 2 * k), random_image(8, 6, 3, 8, 2 * k + 1));
    w.add_pose(k / 7.5, {{}, Vec3(0.8 * k / 7.5, 0, 0)});
    w.add_tracks(k / 7.5, {{k, 1.0, 2.0, 3.0}});
  }
  for (int k = 0; k / 15.0 < seconds; ++k) {
    if (thermal_gap_at >= 0 && std::abs(k / 15.0 - thermal_gap_at) < 0.1) continue;
    w.add_thermal(k / 15.0, random_image(8, 6, 1, 16, 100 + k));
  }
  for (int k = 0; k / 128.0 < seconds; ++k) {
    w.add_visnir(k / 128.0, small_line(0.01f * (k % 50)));
    w.add_imu({k / 128.0, Vec3(0, 0, -9.81 + 0.001 * k), {}});
  }
  return w.finish();
}

TEST(Dataset, WriterLoaderRoundTrip) {
  TempDir dir("ds");
  const DatasetCounts written = write_small(dir.path(), 2.0);
  const SensorLog log = load_dataset(dir.path());
  EXPECT_EQ(log.counts(), written);
  EXPECT_EQ(written.stereo, 15u);
  EXPECT_EQ(written.thermal, 30u);
  EXPECT_EQ(written.imu, 256u);
  EXPECT_EQ(log.calib, small_calib());
  EXPECT_EQ(log.visnir_columns, 2);
  EXPECT_EQ(load_image(log, log.stereo[3].left), random_image(8, 6, 3, 8, 6));
  EXPECT_EQ(load_image(log, log.thermal[4].path), random_image(8, 6, 1, 16, 104));
  EXPECT_EQ(load_spectral_line(log, log.visnir[7].path), small_line(0.07f));
  EXPECT_EQ(log.imu[100].accel, Vec3(0, 0, -9.81 + 0.1));
  EXPECT_EQ(log.tracks[2].observations, (std::vector<LandmarkObservation>{{2, 1.0, 2.0, 3.0}}));
}

TEST(Dataset, BundleAtPaperRates) {
  TempDir dir("bundle");
  write_small(dir.path(), 3.0);
  const SensorLog log = load_dataset(dir.path());
  for (std::size_t i = 0; i < log.stereo.size(); ++i) {
    const FrameBundle b = bundle_at(log, log.stereo[i].t);
    EXPECT_EQ(b.index, static_cast<int>(i));
    ASSERT_TRUE(b.thermal.has_value());
    EXPECT_LE(std::abs(*b.thermal_t - b.t), 1.0 / 30 + 1e-12);
    ASSERT_TRUE(b.visnir.has_value());
    EXPECT_LE(std::abs(*b.visnir_t - b.t), 0.01);
    ASSERT_TRUE(b.pose.has_value());
    EXPECT_NEAR(b.pose->translation.x(), 0.8 * b.t, 1e-12);
    EXPECT_EQ(b.tracks.size(), 1u);
    if (i + 1 < log.stereo.size()) {
      EXPECT_GE(b.imu.size(), 17u);
      EXPECT_LE(b.imu.size(), 18u);
      for (const auto& s : b.imu) {
        EXPECT_GE(s.t, b.t);
        EXPECT_LT(s.t, log.stereo[i + 1].t);
      }
    }
  }
  EXPECT_TF_ERROR(bundle_at(log, 0.05), ErrorCode::kInvalidTimestamp);
}

TEST(Dataset, ThermalGapLeavesItemAbsent) {
  TempDir dir("gap");
  write_small(dir.path(), 2.0, 1.2);  // drops thermal frames within 0.1 s of 1.2 s
  const SensorLog log = load_dataset(dir.path());
  const FrameBundle b = bundle_at(log, 9 / 7.5);
  EXPECT_FALSE(b.thermal.has_value());
  EXPECT_FALSE(b.thermal_t.has_value());
  EXPECT_TRUE(bundle_at(log, 0.0).thermal.has_value());
}

TEST(Dataset, NeverAttachesBeyondTolerance) {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> off(-0.2, 0.2), tol(0.001, 0.1);
  TempDir dir("sync");
  for (int trial = 0; trial < 5; ++trial) {
    const fs::path root = dir / std::to_string(trial);
    DatasetWriter w(root, small_calib(), small_calib().scanline.band_centers, 2);
    const double th_off = off(rng), vn_off = off(rng);
    for (int k = 0; k < 10; ++k) {
      w.add_stereo(k / 7.5, ImageBuffer(8, 6, 3, 8), ImageBuffer(8, 6, 3, 8));
    }
    for (int k = 0; k < 20; ++k) w.add_thermal(0.25 + k / 15.0 + th_off, ImageBuffer(8, 6, 1, 16));
    for (int k = 0; k < 40; ++k) w.add_visnir(0.25 + k / 20.0 + vn_off, small_line(0.5f));
    w.finish();
    const SensorLog log = load_dataset(root);
    for (int q = 0; q < 20; ++q) {
      const SyncTolerance t{tol(rng), tol(rng)};
      for (const auto& s : log.stereo) {
        const FrameBundle b = bundle_at(log, s.t, t);
        if (b.thermal_t) EXPECT_LE(std::abs(*b.thermal_t - b.t), t.thermal);
        if (b.visnir_t) EXPECT_LE(std::abs(*b.visnir_t - b.t), t.visnir);
        // And whenever something lies within tolerance, the nearest is used.
        double best = INFINITY;
        for (const auto& r : log.thermal) best = std::min(best, std::abs(r.t - b.t));
        EXPECT_EQ(b.thermal_t.has_value(), best <= t.thermal);
        if (b.thermal_t) EXPECT_EQ(std::abs(*b.thermal_t - b.t), best);
      }
    }
  }
}

TEST(Dataset, LoadErrors) {
  TempDir dir("dserr");
  EXPECT_TF_ERROR(load_dataset(dir.path()), ErrorCode::kMissingManifest);

  write_small(dir.path(), 0.5);
  const SensorLog log = load_dataset(dir.path());
  const fs::path victim = dir.path() / log.stereo[1].right;
  fs::remove(victim);
  try {
    load_dataset(dir.path());
    ADD_FAILURE() << "expected missing-payload";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingPayload);
    EXPECT_NE(std::string(e.what()).find(victim.filename().string()), std::string::npos);
  }

  auto rewrite = [&](const fs::path& root, const std::string& extra) {
    std::ostringstream m;
    m << R"({"format":"terrafuse-dataset/1"})" << "\n" << extra;
    std::ofstream(root / kManifestName) << m.str();
    save_calibration(small_calib(), root / kCalibName);
  };
  TempDir d2("dserr2");
  rewrite(d2.path(), R"({"sensor":"imu","t":0.5,"accel":[0,0,-9.81],"q":[1,0,0,0]})"
                     "\n"
                     R"({"sensor":"imu","t":0.4,"accel":[0,0,-9.81],"q":[1,0,0,0]})"
                     "\n");
  EXPECT_TF_ERROR(load_dataset(d2.path()), ErrorCode::kNonMonotone);
  rewrite(d2.path(), R"({"sensor":"lidar","t":0.5})" "\n");
  try {
    load_dataset(d2.path());
    ADD_FAILURE() << "expected bad-schema";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadSchema);
    EXPECT_NE(std::string(e.what()).find("manifest.jsonl:2"), std::string::npos) << e.what();
  }
  rewrite(d2.path(), R"({"sensor":"imu","t":0.5,"accel":[0,0],"q":[1,0,0,0]})" "\n");
  EXPECT_TF_ERROR(load_dataset(d2.path()), ErrorCode::kBadSchema);
  rewrite(d2.path(), R"({"sensor":"pose","t":0.5,"translation":[0,0,0],"q":[2,0,0,0]})" "\n");
  EXPECT_TF_ERROR(load_dataset(d2.path()), ErrorCode::kBadSchema);
  std::ofstream(d2.path() / kManifestName) << R"({"format":"other/9"})" << "\n";
  EXPECT_TF_ERROR(load_dataset(d2.path()), ErrorCode::kBadSchema);
}

TEST(Dataset, GeneratedDatasetMatchesWorld) {
  WorldSpec spec = scenario("grass-paved");
  spec.duration = 1.0;
  spec.rig.width = 80;
  spec.rig.height = 60;
  spec.rig.focal = 80;
  spec.rig.thermal_width = 40;
  spec.rig.thermal_height = 30;
  spec.rig.thermal_focal = 38;
  const World world(spec, 17);
  TempDir dir("gen");
  const GenerateReport rep = generate_dataset(world, dir.path(), 2);
  const SensorLog log = load_dataset(dir.path());
  const DatasetCounts sidecar = counts_from_json(nlohmann::json::parse(test::slurp(dir / "gt_counts.json")));
  EXPECT_EQ(log.counts(), sidecar);
  EXPECT_EQ(log.counts(), rep.counts);
  EXPECT_EQ(sidecar.stereo, 8u);
  EXPECT_EQ(sidecar.thermal, 15u);
  EXPECT_EQ(sidecar.imu, 128u);
  EXPECT_EQ(log.calib, world.calibration());
  // Payloads are exactly what the world renders.
  for (int k : {0, 5}) {
    const RenderedStereo st = render_stereo(world, log.stereo[k].t, k);
    EXPECT_EQ(load_image(log, log.stereo[k].left), st.left);
    EXPECT_EQ(load_image(log, log.stereo[k].right), st.right);
  }
  EXPECT_EQ(load_image(log, log.thermal[3].path), render_thermal(world, log.thermal[3].t, 3));
  EXPECT_EQ(load_spectral_line(log, log.visnir[50].path), render_visnir(world, log.visnir[50].t, 50));
  const auto imu = generate_imu(world);
  ASSERT_EQ(imu.size(), log.imu.size());
  for (std::size_t i = 0; i < imu.size(); ++i) {
    EXPECT_EQ(imu[i].t, log.imu[i].t);
    EXPECT_EQ(imu[i].accel, log.imu[i].accel);
    EXPECT_EQ(imu[i].orientation, log.imu[i].orientation);
  }
  for (std::size_t i = 0; i < log.poses.samples.size(); ++i) {
    EXPECT_EQ(log.poses.samples[i].T_world_vehicle, world.vehicle_pose(log.poses.samples[i].t));
  }
}

MultiLayerMap three_points() {
  MultiLayerMap m;
  m.cell_size = 0.02;
  MapPoint a;
  a.position = Vec3(0.123456789012, -4.5, 1e-7);
  a.rgb = {1, 2, 3};
  a.thermal = 3012.25;
  a.ndvi = 0.408450704;
  a.frame_id = 7;
  MapPoint b;
  b.position = Vec3(100.5, 2.0 / 3.0, -0.25);
  b.rgb = {255, 0, 128};
  MapPoint c = b;
  c.position.z() = 3;
  c.ndvi = -1.0;
  m.points = {a, b, c};
  return m;
}

TEST(Ply, HeaderAndNanTokens) {
  TempDir dir("ply");
  export_ply(three_points(), dir / "m.ply");
  const std::string text = test::slurp(dir / "m.ply");
  EXPECT_EQ(text.rfind("ply\nformat ascii 1.0\n", 0), 0u);
  EXPECT_NE(text.find("element vertex 3\n"), std::string::npos);
  EXPECT_NE(text.find("comment cell_size 0.02\n"), std::string::npos);
  for (const char* prop : {"x", "y", "z", "red", "green", "blue", "thermal", "ndvi", "frame_id"}) {
    EXPECT_NE(text.find(std::string(" ") + prop + "\n"), std::string::npos) << prop;
  }
  const auto body = text.substr(text.find("end_header\n") + 11);
  std::istringstream lines(body);
  std::string l1, l2;
  std::getline(lines, l1);
  std::getline(lines, l2);
  EXPECT_EQ(l2, "100.5 0.666666667 -0.25 255 0 128 nan nan 0");
  EXPECT_TF_ERROR(export_ply(MultiLayerMap{}, dir / "e.ply"), ErrorCode::kEmptyMap);
  EXPECT_TF_ERROR(export_ply(three_points(), dir / "missing/dir/m.ply"), ErrorCode::kIoError);
}

double sig9(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return std::stod(s.str());
}

TEST(Ply, RoundTripWithinPrintedPrecision) {
  TempDir dir("plyrt");
  const MultiLayerMap m = three_points();
  export_ply(m, dir / "m.ply");
  const MultiLayerMap r = read_ply(dir / "m.ply");
  EXPECT_EQ(r.cell_size, 0.02);
  ASSERT_EQ(r.size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_EQ(r.points[i].position[k], sig9(m.points[i].position[k]));
    EXPECT_EQ(r.points[i].rgb, m.points[i].rgb);
    EXPECT_EQ(r.points[i].thermal.has_value(), m.points[i].thermal.has_value());
    if (m.points[i].thermal) EXPECT_EQ(*r.points[i].thermal, sig9(*m.points[i].thermal));
    EXPECT_EQ(r.points[i].ndvi.has_value(), m.points[i].ndvi.has_value());
    if (m.points[i].ndvi) EXPECT_EQ(*r.points[i].ndvi, sig9(*m.points[i].ndvi));
    EXPECT_EQ(r.points[i].frame_id, m.points[i].frame_id);
  }
  // Second pass is exact: printed values are fixed points.
  export_ply(r, dir / "r.ply");
  EXPECT_EQ(test::slurp(dir / "r.ply"), test::slurp(dir / "m.ply"));
}

TEST(Ply, MalformedInput) {
  TempDir dir("plybad");
  std::ofstream(dir / "a.ply") << "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3\n";
  EXPECT_TF_ERROR(read_ply(dir / "a.ply"), ErrorCode::kParseError);
  EXPECT_TF_ERROR(read_ply(dir / "none.ply"), ErrorCode::kMissingPayload);
}

FeatureVector row(double t, double base) {
  FeatureVector fv;
  fv.t_mid = t;
  for (int i = 0; i < kFeatureCount; ++i) fv.values[i] = base + i / 3.0;
  return fv;
}

TEST(FeaturesCsv, EmptyAndTwoRows) {
  TempDir dir("csv");
  export_features_csv({}, dir / "e.csv");
  EXPECT_EQ(test::slurp(dir / "e.csv"), features_csv_header() + "\n");
  EXPECT_TRUE(read_features_csv(dir / "e.csv").empty());
  const std::vector<FeatureVector> rows{row(0.2, 1.0), row(0.7, -2.5)};
  export_features_csv(rows, dir / "r.csv");
  const std::string text = test::slurp(dir / "r.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(features_csv_header().rfind("t_mid,c1_mean,", 0), 0u);
  EXPECT_NE(features_csv_header().find("rms_az,color_degenerate,thermal_degenerate,ndvi_degenerate,accel_degenerate"),
            std::string::npos);
}

TEST(FeaturesCsv, ReparseEqualsInput) {
  TempDir dir("csvrt");
  std::mt19937_64 rng(92);
  std::normal_distribution<double> n(0.0, 100.0);
  std::vector<FeatureVector> rows;
  for (int r = 0; r < 30; ++r) {
    FeatureVector fv;
    fv.t_mid = 0.5 * r;
    for (double& v : fv.values) v = n(rng);
    fv.flags.color = r % 2;
    fv.flags.ndvi = r % 3 == 0;
    if (fv.flags.ndvi) {
      for (int i = 16; i < 20; ++i) fv.values[i] = std::nan("");
    }
    rows.push_back(fv);
  }
  export_features_csv(rows, dir / "f.csv");
  const auto back = read_features_csv(dir / "f.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    EXPECT_NEAR(back[r].t_mid, rows[r].t_mid, 1e-9);
    EXPECT_EQ(back[r].flags, rows[r].flags);
    for (int i = 0; i < kFeatureCount; ++i) {
      if (std::isnan(rows[r].values[i])) {
        EXPECT_TRUE(std::isnan(back[r].values[i]));
      } else {
        EXPECT_NEAR(back[r].values[i], rows[r].values[i], 1e-9);
      }
    }
  }
  std::ofstream(dir / "bad.csv") << features_csv_header() << "\n1,2,3\n";
  EXPECT_TF_ERROR(read_features_csv(dir / "bad.csv"), ErrorCode::kParseError);
  EXPECT_TF_ERROR(export_features_csv(rows, dir / "no/dir/f.csv"), ErrorCode::kIoError);
}

TEST(EventsCsv, RoundTrip) {
  TempDir dir("ev");
  const std::vector<ChangeEvent> ev{{10.4, "rms_az", 7.5, 0.0, 5.0}, {11.0, "c3_mean", 0.0, 6.25, 5.0}};
  export_events_csv(ev, dir / "e.csv");
  EXPECT_EQ(test::slurp(dir / "e.csv").substr(0, 30), "t,feature_name,s_plus,s_minus,");
  EXPECT_EQ(read_events_csv(dir / "e.csv"), ev);
}

TEST(FormatReal, ShortestRoundTrip) {
  std::mt19937_64 rng(93);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    const double v = std::bit_cast<double>(bits(rng));
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(parse_real(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(std::nan("")), "nan");
  EXPECT_TRUE(std::isnan(parse_real("nan")));
}

}  // namespace
}  // namespace terrafuse
