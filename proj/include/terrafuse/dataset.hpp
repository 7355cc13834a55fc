#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "terrafuse/calib.hpp"
#include "terrafuse/image.hpp"
#include "terrafuse/imuproc.hpp"
#include "terrafuse/motion.hpp"
#include "terrafuse/spectral.hpp"

namespace terrafuse {

inline constexpr const char* kDatasetFormat = "terrafuse-dataset/1";
inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kCalibName = "calib.json";

// Landmark seen in the rectified left image, with its stereo disparity.
struct LandmarkObservation {
  int id = 0;
  double u = 0.0;
  double v = 0.0;
  double disparity = 0.0;  // px

  bool operator==(const LandmarkObservation&) const = default;
};

struct StereoRecord {
  double t = 0.0;
  std::filesystem::path left;   // relative to the dataset root
  std::filesystem::path right;

  bool operator==(const StereoRecord&) const = default;
};

struct PayloadRecord {
  double t = 0.0;
  std::filesystem::path path;  // relative to the dataset root

  bool operator==(const PayloadRecord&) const = default;
};

struct TrackRecord {
  double t = 0.0;
  std::vector<LandmarkObservation> observations;

  bool operator==(const TrackRecord&) const = default;
};

struct DatasetCounts {
  std::size_t stereo = 0, thermal = 0, visnir = 0, imu = 0, pose = 0, tracks = 0;

  bool operator==(const DatasetCounts&) const = default;
};

nlohmann::json counts_to_json(const DatasetCounts& c);
DatasetCounts counts_from_json(const nlohmann::json& j);

// Parsed manifest plus calibration. Image and line payloads stay on disk
// until a bundle is assembled.
struct SensorLog {
  std::filesystem::path root;
  CalibrationSet calib;
  std::vector<double> visnir_band_centers;
  int visnir_columns = 0;
  std::vector<StereoRecord> stereo;
  std::vector<PayloadRecord> thermal;
  std::vector<PayloadRecord> visnir;
  std::vector<ImuSample> imu;
  Trajectory poses;  // T_world_vehicle
  std::vector<TrackRecord> tracks;

  DatasetCounts counts() const;
};

// Throws missing-manifest, bad-schema (naming the manifest line),
// non-monotone or missing-payload (naming the path).
SensorLog load_dataset(const std::filesystem::path& root);

ImageBuffer load_image(const SensorLog& log, const std::filesystem::path& rel);
SpectralLine load_spectral_line(const SensorLog& log, const std::filesystem::path& rel);

struct SyncTolerance {
  double thermal = 0.07;  // s
  double visnir = 0.01;   // s
};

struct FrameBundle {
  int index = 0;  // stereo frame index
  double t = 0.0;
  ImageBuffer left;
  ImageBuffer right;
  std::optional<ImageBuffer> thermal;
  std::optional<double> thermal_t;
  std::optional<SpectralLine> visnir;
  std::optional<double> visnir_t;
  std::vector<ImuSample> imu;  // [t, next stereo t)
  std::optional<RigidTransform> pose;  // T_world_vehicle
  bool pose_extrapolated = false;
  std::vector<LandmarkObservation> tracks;
};

// Index of the stereo frame taken at exactly t_stereo; throws
// invalid-timestamp if there is none.
int stereo_index(const SensorLog& log, double t_stereo);

// Nearest thermal frame and VIS-NIR line within tolerance, IMU samples up to
// the next stereo frame, interpolated pose and the landmark tracks recorded
// at the same instant.
FrameBundle bundle_at(const SensorLog& log, double t_stereo, const SyncTolerance& tol = {});
FrameBundle bundle_at_index(const SensorLog& log, int index, const SyncTolerance& tol = {});

// Streams records into a dataset directory; the manifest is written by
// finish(), ordered by time and then by stream.
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path root, const CalibrationSet& calib,
                std::vector<double> visnir_band_centers, int visnir_columns);

  void add_stereo(double t, const ImageBuffer& left, const ImageBuffer& right);
  void add_thermal(double t, const ImageBuffer& image);
  void add_visnir(double t, const SpectralLine& line);
  void add_imu(const ImuSample& sample);
  void add_pose(double t, const RigidTransform& T_world_vehicle);
  void add_tracks(double t, const std::vector<LandmarkObservation>& observations);

  DatasetCounts finish();

 private:
  struct Entry {
    double t;
    int rank;
    std::size_t seq;
    nlohmann::json record;
  };
  void push(double t, int rank, nlohmann::json record);

  std::filesystem::path root_;
  std::vector<double> band_centers_;
  int columns_ = 0;
  std::vector<Entry> entries_;
  DatasetCounts counts_;
  bool finished_ = false;
};

}  // namespace terrafuse
