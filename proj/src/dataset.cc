#include "terrafuse/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "terrafuse/error.hpp"
#include "terrafuse/netpbm.hpp"

namespace terrafuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum SensorRank { kStereo, kThermal, kVisnir, kImu, kPose, kTracks };

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat_json(const UnitQuaternion& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

UnitQuaternion quat_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("expected 4-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void check_payload(const fs::path& root, const fs::path& rel) {
  if (!fs::is_regular_file(root / rel)) {
    fail(ErrorCode::kMissingPayload, "payload not found: " + (root / rel).string());
  }
}

template <typename T>
void check_monotone(const std::vector<T>& records, const char* stream) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (!(records[i].t > records[i - 1].t)) {
      std::ostringstream msg;
      msg << stream << " timestamps not increasing at record " << i << " (t=" << records[i].t
          << ")";
      fail(ErrorCode::kNonMonotone, msg.str());
    }
  }
}

}  // namespace

json counts_to_json(const DatasetCounts& c) {
  return {{"stereo", c.stereo}, {"thermal", c.thermal}, {"visnir", c.visnir},
          {"imu", c.imu},       {"pose", c.pose},       {"tracks", c.tracks}};
}

DatasetCounts counts_from_json(const json& j) {
  DatasetCounts c;
  c.stereo = j.at("stereo").get<std::size_t>();
  c.thermal = j.at("thermal").get<std::size_t>();
  c.visnir = j.at("visnir").get<std::size_t>();
  c.imu = j.at("imu").get<std::size_t>();
  c.pose = j.at("pose").get<std::size_t>();
  c.tracks = j.at("tracks").get<std::size_t>();
  return c;
}

DatasetCounts SensorLog::counts() const {
  return {stereo.size(), thermal.size(), visnir.size(),
          imu.size(),    poses.samples.size(), tracks.size()};
}

SensorLog load_dataset(const fs::path& root) {
  const fs::path manifest = root / kManifestName;
  std::ifstream in(manifest);
  if (!in) fail(ErrorCode::kMissingManifest, "no " + std::string(kManifestName) + " in " + root.string());

  SensorLog log;
  log.root = root;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    try {
      const json rec = json::parse(line);
      if (!header_seen) {
        if (rec.at("format").get<std::string>() != kDatasetFormat) {
          fail(ErrorCode::kBadSchema, where + ": unsupported format");
        }
        if (rec.contains("visnir")) {
          const json& v = rec.at("visnir");
          log.visnir_band_centers = v.at("band_centers").get<std::vector<double>>();
          log.visnir_columns = v.at("columns").get<int>();
          if (v.at("band_count").get<std::size_t>() != log.visnir_band_centers.size()) {
            fail(ErrorCode::kBadSchema, where + ": band_count does not match band_centers");
          }
        }
        header_seen = true;
        continue;
      }
      const std::string sensor = rec.at("sensor").get<std::string>();
      const double t = rec.at("t").get<double>();
      if (!std::isfinite(t)) fail(ErrorCode::kBadSchema, where + ": non-finite timestamp");
      if (sensor == "stereo") {
        log.stereo.push_back({t, rec.at("left").get<std::string>(), rec.at("right").get<std::string>()});
      } else if (sensor == "thermal") {
        log.thermal.push_back({t, rec.at("path").get<std::string>()});
      } else if (sensor == "visnir") {
        log.visnir.push_back({t, rec.at("path").get<std::string>()});
      } else if (sensor == "imu") {
        log.imu.push_back({t, vec3_from(rec.at("accel")), quat_from(rec.at("q"))});
      } else if (sensor == "pose") {
        log.poses.samples.push_back({t, {quat_from(rec.at("q")), vec3_from(rec.at("translation"))}});
      } else if (sensor == "tracks") {
        TrackRecord tr{t, {}};
        for (const json& o : rec.at("obs")) {
          if (!o.is_array() || o.size() != 4) throw std::invalid_argument("track entry needs 4 values");
          tr.observations.push_back({o[0].get<int>(), o[1].get<double>(), o[2].get<double>(),
                                     o[3].get<double>()});
        }
        log.tracks.push_back(std::move(tr));
      } else {
        fail(ErrorCode::kBadSchema, where + ": unknown sensor '" + sensor + "'");
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kBadSchema, where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      fail(ErrorCode::kBadSchema, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidArgument) {
        fail(ErrorCode::kBadSchema, where + ": " + e.what());
      }
      throw;
    }
  }
  if (!header_seen) fail(ErrorCode::kBadSchema, manifest.string() + ": missing header record");

  check_monotone(log.stereo, "stereo");
  check_monotone(log.thermal, "thermal");
  check_monotone(log.visnir, "visnir");
  check_monotone(log.imu, "imu");
  check_monotone(log.poses.samples, "pose");
  check_monotone(log.tracks, "tracks");

  for (const auto& r : log.stereo) {
    check_payload(root, r.left);
    check_payload(root, r.right);
  }
  for (const auto& r : log.thermal) check_payload(root, r.path);
  for (const auto& r : log.visnir) check_payload(root, r.path);
  if (!log.visnir.empty() && log.visnir_band_centers.empty()) {
    fail(ErrorCode::kBadSchema, "VIS-NIR records present but the header has no band table");
  }
  if (!fs::is_regular_file(root / kCalibName)) {
    fail(ErrorCode::kMissingPayload, "calibration not found: " + (root / kCalibName).string());
  }
  log.calib = load_calibration(root / kCalibName);
  return log;
}

ImageBuffer load_image(const SensorLog& log, const fs::path& rel) {
  return read_netpbm(log.root / rel);
}

SpectralLine load_spectral_line(const SensorLog& log, const fs::path& rel) {
  const fs::path path = log.root / rel;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingPayload, "cannot open " + path.string());
  SpectralLine line;
  line.band_centers = log.visnir_band_centers;
  line.columns = log.visnir_columns;
  const std::size_t n = static_cast<std::size_t>(line.columns) * line.band_count();
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (in.gcount() != static_cast<std::streamsize>(n * 4) || in.peek() != EOF) {
    fail(ErrorCode::kParseError, path.string() + ": size does not match the band table");
  }
  line.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t w = raw[i];
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    line.values[i] = std::bit_cast<float>(w);
  }
  return line;
}

int stereo_index(const SensorLog& log, double t_stereo) {
  const auto it = std::lower_bound(log.stereo.begin(), log.stereo.end(), t_stereo,
                                   [](const StereoRecord& r, double t) { return r.t < t; });
  if (it == log.stereo.end() || it->t != t_stereo) {
    std::ostringstream msg;
    msg << "t=" << t_stereo << " is not a stereo frame time";
    fail(ErrorCode::kInvalidTimestamp, msg.str());
  }
  return static_cast<int>(it - log.stereo.begin());
}

namespace {

// Nearest record within tol; ties go to the earlier record.
std::optional<std::size_t> nearest(const std::vector<PayloadRecord>& recs, double t, double tol) {
  if (recs.empty()) return std::nullopt;
  const auto it = std::lower_bound(recs.begin(), recs.end(), t,
                                   [](const PayloadRecord& r, double v) { return r.t < v; });
  std::optional<std::size_t> best;
  double best_dt = tol;
  auto consider = [&](std::size_t i) {
    const double dt = std::abs(recs[i].t - t);
    if (dt < best_dt || (dt == best_dt && (!best || i < *best))) {
      best = i;
      best_dt = dt;
    }
  };
  const std::size_t hi = static_cast<std::size_t>(it - recs.begin());
  if (hi > 0) consider(hi - 1);
  if (hi < recs.size()) consider(hi);
  return best;
}

}  // namespace

FrameBundle bundle_at_index(const SensorLog& log, int index, const SyncTolerance& tol) {
  if (index < 0 || index >= static_cast<int>(log.stereo.size())) {
    fail(ErrorCode::kInvalidTimestamp, "stereo frame index out of range");
  }
  const StereoRecord& rec = log.stereo[index];
  FrameBundle b;
  b.index = index;
  b.t = rec.t;
  b.left = load_image(log, rec.left);
  b.right = load_image(log, rec.right);
  if (const auto i = nearest(log.thermal, rec.t, tol.thermal)) {
    b.thermal = load_image(log, log.thermal[*i].path);
    b.thermal_t = log.thermal[*i].t;
  }
  if (const auto i = nearest(log.visnir, rec.t, tol.visnir)) {
    b.visnir = load_spectral_line(log, log.visnir[*i].path);
    b.visnir_t = log.visnir[*i].t;
  }
  double t_end;
  if (index + 1 < static_cast<int>(log.stereo.size())) {
    t_end = log.stereo[index + 1].t;
  } else {
    t_end = index > 0 ? rec.t + (rec.t - log.stereo[index - 1].t)
                      : std::numeric_limits<double>::infinity();
  }
  const auto first = std::lower_bound(log.imu.begin(), log.imu.end(), rec.t,
                                      [](const ImuSample& s, double t) { return s.t < t; });
  for (auto it = first; it != log.imu.end() && it->t < t_end; ++it) b.imu.push_back(*it);
  if (!log.poses.empty()) {
    const PoseQuery q = pose_at(log.poses, rec.t);
    b.pose = q.pose;
    b.pose_extrapolated = q.extrapolated;
  }
  const auto tr = std::lower_bound(log.tracks.begin(), log.tracks.end(), rec.t,
                                   [](const TrackRecord& r, double t) { return r.t < t; });
  if (tr != log.tracks.end() && tr->t == rec.t) b.tracks = tr->observations;
  return b;
}

FrameBundle bundle_at(const SensorLog& log, double t_stereo, const SyncTolerance& tol) {
  return bundle_at_index(log, stereo_index(log, t_stereo), tol);
}

DatasetWriter::DatasetWriter(fs::path root, const CalibrationSet& calib,
                             std::vector<double> band_centers, int columns)
    : root_(std::move(root)), band_centers_(std::move(band_centers)), columns_(columns) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  for (const char* sub : {"stereo", "thermal", "visnir"}) fs::create_directories(root_ / sub, ec);
  if (ec || !fs::is_directory(root_)) fail(ErrorCode::kIoError, "cannot create " + root_.string());
  save_calibration(calib, root_ / kCalibName);
}

void DatasetWriter::push(double t, int rank, json record) {
  if (finished_) fail(ErrorCode::kInvalidArgument, "dataset writer already finished");
  entries_.push_back({t, rank, entries_.size(), std::move(record)});
}

namespace {

std::string numbered(const char* dir, const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%s%06zu.%s", dir, prefix, i, ext);
  return buf;
}

}  // namespace

void DatasetWriter::add_stereo(double t, const ImageBuffer& left, const ImageBuffer& right) {
  const std::size_t i = counts_.stereo++;
  const std::string l = numbered("stereo", "left_", i, left.channels == 3 ? "ppm" : "pgm");
  const std::string r = numbered("stereo", "right_", i, right.channels == 3 ? "ppm" : "pgm");
  write_netpbm(left, root_ / l);
  write_netpbm(right, root_ / r);
  push(t, kStereo, {{"sensor", "stereo"}, {"t", t}, {"left", l}, {"right", r}});
}

void DatasetWriter::add_thermal(double t, const ImageBuffer& image) {
  const std::string p = numbered("thermal", "", counts_.thermal++, "pgm");
  write_netpbm(image, root_ / p);
  push(t, kThermal, {{"sensor", "thermal"}, {"t", t}, {"path", p}});
}

void DatasetWriter::add_visnir(double t, const SpectralLine& line) {
  if (line.band_centers != band_centers_ || line.columns != columns_) {
    fail(ErrorCode::kInvalidArgument, "spectral line does not match the dataset band table");
  }
  const std::string p = numbered("visnir", "", counts_.visnir++, "bin");
  std::ofstream out(root_ / p, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + (root_ / p).string());
  for (float v : line.values) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    out.write(reinterpret_cast<const char*>(&w), 4);
  }
  push(t, kVisnir, {{"sensor", "visnir"}, {"t", t}, {"path", p}});
}

void DatasetWriter::add_imu(const ImuSample& s) {
  ++counts_.imu;
  push(s.t, kImu,
       {{"sensor", "imu"}, {"t", s.t}, {"accel", vec3_json(s.accel)}, {"q", quat_json(s.orientation)}});
}

void DatasetWriter::add_pose(double t, const RigidTransform& T) {
  ++counts_.pose;
  push(t, kPose,
       {{"sensor", "pose"}, {"t", t}, {"translation", vec3_json(T.translation)},
        {"q", quat_json(T.rotation)}});
}

void DatasetWriter::add_tracks(double t, const std::vector<LandmarkObservation>& obs) {
  ++counts_.tracks;
  json arr = json::array();
  for (const auto& o : obs) arr.push_back(json::array({o.id, o.u, o.v, o.disparity}));
  push(t, kTracks, {{"sensor", "tracks"}, {"t", t}, {"obs", std::move(arr)}});
}

DatasetCounts DatasetWriter::finish() {
  if (finished_) return counts_;
  std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.seq < b.seq;
  });
  std::ofstream out(root_ / kManifestName);
  if (!out) fail(ErrorCode::kIoError, "cannot write manifest in " + root_.string());
  json header = {{"format", kDatasetFormat}};
  if (!band_centers_.empty()) {
    header["visnir"] = {{"band_count", band_centers_.size()},
                        {"columns", columns_},
                        {"band_centers", band_centers_},
                        {"encoding", "float32-le"}};
  }
  out << header.dump() << '\n';
  for (const auto& e : entries_) out << e.record.dump() << '\n';
  if (!out) fail(ErrorCode::kIoError, "manifest write failed in " + root_.string());
  finished_ = true;
  entries_.clear();
  return counts_;
}

}  // namespace terrafuse
