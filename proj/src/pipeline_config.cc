#include <fstream>
#include <set>

#include "terrafuse/error.hpp"
#include "terrafuse/pipeline.hpp"

namespace terrafuse {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    fail(ErrorCode::kInvalidArgument, "config " + field + ": " + why);
  };
  if (sgm.d_max < 1 || sgm.d_max > 256) bad("sgm.d_max", "must lie in [1, 256]");
  if (sgm.P1 < 0 || sgm.P2 < sgm.P1 || sgm.P2 > 4000) bad("sgm.P2", "need 0 <= P1 <= P2 <= 4000");
  if (sgm.paths != 2 && sgm.paths != 4 && sgm.paths != 8) bad("sgm.paths", "must be 2, 4 or 8");
  if (!(sgm.lr_tolerance >= 0.0)) bad("sgm.lr_tolerance", "must be non-negative");
  if (!(d_min >= 0.0)) bad("sgm.d_min", "must be non-negative");
  if (filter.k < 1) bad("filter.k", "must be at least 1");
  if (!(filter.alpha >= 0.0)) bad("filter.alpha", "must be non-negative");
  if (!(voxel >= 0.0)) bad("voxel", "must be non-negative (0 disables)");
  if (!(map_cell > 0.0)) bad("map_cell", "must be positive");
  if (!(spectra_max_px > 0.0)) bad("spectra_max_px", "must be positive");
  patch.footprint.validate();
  if (patch.frames_per_patch < 1) bad("patch.frames_per_patch", "must be at least 1");
  if (patch.stride < 0) bad("patch.stride", "must be non-negative");
  cusum.validate();
  if (!(sync.thermal >= 0.0 && sync.visnir >= 0.0)) bad("sync", "tolerances must be non-negative");
  if (ransac.iterations < 1) bad("vo.iterations", "must be at least 1");
  if (!(ransac.inlier_tol > 0.0)) bad("vo.inlier_tol", "must be positive");
  if (!(gravity > 0.0)) bad("gravity", "must be positive");
  if (jobs < 1) bad("jobs", "must be at least 1");
}

json config_to_json(const PipelineConfig& c) {
  const Footprint& f = c.patch.footprint;
  return {{"sgm",
           {{"d_max", c.sgm.d_max}, {"P1", c.sgm.P1}, {"P2", c.sgm.P2}, {"paths", c.sgm.paths},
            {"lr_check", c.sgm.lr_check}, {"lr_tolerance", c.sgm.lr_tolerance}, {"d_min", c.d_min}}},
          {"filter",
           {{"enabled", c.filter_enabled}, {"k", c.filter.k}, {"alpha", c.filter.alpha}}},
          {"voxel", c.voxel},
          {"map_cell", c.map_cell},
          {"spectra_max_px", c.spectra_max_px},
          {"patch",
           {{"footprint", {{"x_min", f.x_min}, {"x_max", f.x_max}, {"y_min", f.y_min}, {"y_max", f.y_max}}},
            {"frames_per_patch", c.patch.frames_per_patch},
            {"stride", c.patch.stride}}},
          {"cusum",
           {{"k", c.cusum.k}, {"h", c.cusum.h}, {"warmup", c.cusum.warmup},
            {"one_sided", c.cusum.one_sided}}},
          {"sync", {{"thermal", c.sync.thermal}, {"visnir", c.sync.visnir}}},
          {"vo",
           {{"enabled", c.vo}, {"iterations", c.ransac.iterations},
            {"inlier_tol", c.ransac.inlier_tol}}},
          {"seed", c.seed},
          {"gravity", c.gravity}};
}

namespace {

// Reads the listed keys of an object, rejecting anything else.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) fail(ErrorCode::kBadSchema, "config " + name_ + ": expected an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kBadSchema, "config " + name_ + "." + key + ": " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return doc_.contains(key) ? &doc_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : doc_.items()) {
      if (!seen_.count(k)) fail(ErrorCode::kBadSchema, "config " + name_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig config_from_json(const json& doc, PipelineConfig c) {
  Section root(doc, "root");
  if (const json* j = root.child("sgm")) {
    Section s(*j, "sgm");
    s.get("d_max", c.sgm.d_max);
    s.get("P1", c.sgm.P1);
    s.get("P2", c.sgm.P2);
    s.get("paths", c.sgm.paths);
    s.get("lr_check", c.sgm.lr_check);
    s.get("lr_tolerance", c.sgm.lr_tolerance);
    s.get("d_min", c.d_min);
    s.finish();
  }
  if (const json* j = root.child("filter")) {
    Section s(*j, "filter");
    s.get("enabled", c.filter_enabled);
    s.get("k", c.filter.k);
    s.get("alpha", c.filter.alpha);
    s.finish();
  }
  root.get("voxel", c.voxel);
  root.get("map_cell", c.map_cell);
  root.get("spectra_max_px", c.spectra_max_px);
  if (const json* j = root.child("patch")) {
    Section s(*j, "patch");
    if (const json* fj = s.child("footprint")) {
      Section f(*fj, "patch.footprint");
      f.get("x_min", c.patch.footprint.x_min);
      f.get("x_max", c.patch.footprint.x_max);
      f.get("y_min", c.patch.footprint.y_min);
      f.get("y_max", c.patch.footprint.y_max);
      f.finish();
    }
    s.get("frames_per_patch", c.patch.frames_per_patch);
    s.get("stride", c.patch.stride);
    s.finish();
  }
  if (const json* j = root.child("cusum")) {
    Section s(*j, "cusum");
    s.get("k", c.cusum.k);
    s.get("h", c.cusum.h);
    s.get("warmup", c.cusum.warmup);
    s.get("one_sided", c.cusum.one_sided);
    s.finish();
  }
  if (const json* j = root.child("sync")) {
    Section s(*j, "sync");
    s.get("thermal", c.sync.thermal);
    s.get("visnir", c.sync.visnir);
    s.finish();
  }
  if (const json* j = root.child("vo")) {
    Section s(*j, "vo");
    s.get("enabled", c.vo);
    s.get("iterations", c.ransac.iterations);
    s.get("inlier_tol", c.ransac.inlier_tol);
    s.finish();
  }
  root.get("seed", c.seed);
  root.get("gravity", c.gravity);
  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void echo_config(const PipelineConfig& config, const fs::path& dir) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path, std::ios::binary);
  out << config_to_json(config).dump(2) << '\n';
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMissingManifest:
    case ErrorCode::kBadSchema:
    case ErrorCode::kNonMonotone:
    case ErrorCode::kMissingPayload:
    case ErrorCode::kParseError:
    case ErrorCode::kInvalidTimestamp:
      return 2;
    default:
      return 1;
  }
}

}  // namespace terrafuse
