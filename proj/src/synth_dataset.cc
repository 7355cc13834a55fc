#include <cmath>
#include <fstream>

#include "terrafuse/error.hpp"
#include "terrafuse/exports.hpp"
#include "terrafuse/parallel.hpp"
#include "terrafuse/synthgen.hpp"
#include "terrafuse/terrafeat.hpp"

namespace terrafuse {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
}

// Material under the default chassis footprint, or "mixed" when the
// footprint straddles a boundary.
std::string footprint_material(const World& world, double t) {
  const Footprint fp;
  const RigidTransform T = world.vehicle_pose(t);
  int first = -1;
  for (double x : {fp.x_min, fp.x_max}) {
    for (double y : {fp.y_min, fp.y_max}) {
      const int m = world.ground_material_at(T(Vec3(x, y, 0.0)).x());
      if (first < 0) first = m;
      if (m != first) return "mixed";
    }
  }
  return world.material(first).name;
}

}  // namespace

GenerateReport generate_dataset(const World& world, const fs::path& out, int jobs) {
  const WorldSpec& spec = world.spec();
  const CalibrationSet& calib = world.calibration();
  const double duration = world.duration();
  DatasetWriter writer(out, calib, calib.scanline.band_centers, spec.rig.visnir_columns);

  const std::vector<double> stereo_t = stream_times(spec.rates.stereo, duration);
  const std::vector<double> thermal_t = stream_times(spec.rates.thermal, duration);
  const std::vector<double> visnir_t = stream_times(spec.rates.visnir, duration);

  const fs::path lm_path = out / "gt_landmarks.csv";
  std::ofstream lm = open_out(lm_path);
  lm << "t,frame,id,x,y,z,u,v,disparity,outlier\n";
  const fs::path mat_path = out / "gt_materials.csv";
  std::ofstream mat = open_out(mat_path);
  mat << "t,frame,axle_material,footprint_material\n";
  const fs::path pose_path = out / "gt_poses.csv";
  std::ofstream poses = open_out(pose_path);
  poses << "t,x,y,z,qw,qx,qy,qz\n";

  // Render in chunks so memory stays bounded; write in index order.
  const int chunk = std::max(1, jobs) * 4;
  for (std::size_t base = 0; base < stereo_t.size(); base += chunk) {
    const int n = static_cast<int>(std::min<std::size_t>(chunk, stereo_t.size() - base));
    std::vector<RenderedStereo> frames(n);
    parallel_for(n, jobs, [&](int i) {
      frames[i] = render_stereo(world, stereo_t[base + i], static_cast<int>(base + i));
    });
    for (int i = 0; i < n; ++i) {
      const int index = static_cast<int>(base + i);
      const double t = stereo_t[index];
      writer.add_stereo(t, frames[i].left, frames[i].right);
      const RigidTransform T = world.vehicle_pose(t);
      writer.add_pose(t, T);
      const auto tracks = observe_landmarks(world, t, index);
      writer.add_tracks(t, tracks);

      const auto q = T.rotation.coeffs();
      poses << format_real(t) << ',' << format_real(T.translation.x()) << ','
            << format_real(T.translation.y()) << ',' << format_real(T.translation.z());
      for (double c : q) poses << ',' << format_real(c);
      poses << '\n';
      mat << format_real(t) << ',' << index << ','
          << world.material(world.ground_material_at(T.translation.x())).name << ','
          << footprint_material(world, t) << '\n';

      const RigidTransform T_left_world = invert(world.left_pose(t));
      for (const LandmarkObservation& o : tracks) {
        const Vec3& X = world.landmarks()[o.id];
        const auto ip = project(calib.left_cam, T_left_world(X));
        const bool outlier = !ip || ip->u != o.u || ip->v != o.v;
        lm << format_real(t) << ',' << index << ',' << o.id << ',' << format_real(X.x()) << ','
           << format_real(X.y()) << ',' << format_real(X.z()) << ',' << format_real(o.u) << ','
           << format_real(o.v) << ',' << format_real(o.disparity) << ',' << (outlier ? 1 : 0)
           << '\n';
      }
    }
  }
  close_out(lm, lm_path);
  close_out(mat, mat_path);
  close_out(poses, pose_path);

  for (std::size_t base = 0; base < thermal_t.size(); base += chunk) {
    const int n = static_cast<int>(std::min<std::size_t>(chunk, thermal_t.size() - base));
    std::vector<ImageBuffer> frames(n);
    parallel_for(n, jobs, [&](int i) {
      frames[i] = render_thermal(world, thermal_t[base + i], static_cast<int>(base + i));
    });
    for (int i = 0; i < n; ++i) writer.add_thermal(thermal_t[base + i], frames[i]);
  }
  for (std::size_t i = 0; i < visnir_t.size(); ++i) {
    writer.add_visnir(visnir_t[i], render_visnir(world, visnir_t[i], static_cast<int>(i)));
  }
  for (const ImuSample& s : generate_imu(world)) writer.add_imu(s);

  GenerateReport report;
  report.counts = writer.finish();

  nlohmann::json boundaries = nlohmann::json::array();
  for (std::size_t i = 1; i < spec.segments.size(); ++i) boundaries.push_back(spec.boundary_time(i));
  const nlohmann::json world_doc = {{"seed", world.seed()},
                                    {"duration", duration},
                                    {"boundary_times", boundaries},
                                    {"spec", world_spec_to_json(spec)}};
  const fs::path world_path = out / "gt_world.json";
  std::ofstream wf = open_out(world_path);
  wf << world_doc.dump(2) << '\n';
  close_out(wf, world_path);
  const fs::path counts_path = out / "gt_counts.json";
  std::ofstream cf = open_out(counts_path);
  cf << counts_to_json(report.counts).dump(2) << '\n';
  close_out(cf, counts_path);
  return report;
}

}  // namespace terrafuse
