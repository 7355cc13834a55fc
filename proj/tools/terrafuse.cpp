// terrafuse command-line front end.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "terrafuse/error.hpp"
#include "terrafuse/pipeline.hpp"
#include "terrafuse/synthgen.hpp"

namespace fs = std::filesystem;
using namespace terrafuse;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline config JSON (missing keys keep defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed; beats TERRAFUSE_SEED and the config file");
  cmd->add_option("-j,--jobs", o.jobs, "Worker threads; outputs do not depend on it")
      ->check(CLI::Range(1, 256));
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("TERRAFUSE_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, std::string("TERRAFUSE_SEED is not an unsigned integer: ") + s);
  }
}

PipelineConfig effective_config(const CommonOptions& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (auto s = env_seed()) c.seed = *s;
  if (o.seed) c.seed = *o.seed;
  c.jobs = o.jobs;
  c.validate();
  return c;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal terrain mapping and ground change detection"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ground-truth sidecars");
  std::string scenario_name = "grass-paved", spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<double> synth_duration;
  int synth_jobs = 1;
  bool noiseless = false;
  synth->add_option("--scenario", scenario_name,
                    "grass-paved, three-surface, uniform-grass, uniform-ploughed, uniform-paved");
  synth->add_option("--spec", spec_path, "World spec JSON instead of a named scenario")
      ->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "World seed; beats TERRAFUSE_SEED");
  synth->add_option("--duration", synth_duration, "Seconds to record (default: whole path)")
      ->check(CLI::PositiveNumber);
  synth->add_flag("--noiseless", noiseless, "No sensor noise and no texture");
  synth->add_option("-o,--out", synth_out, "Output dataset directory")->required();
  synth->add_option("-j,--jobs", synth_jobs, "Rendering threads")->check(CLI::Range(1, 256));

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Build the multi-layer map (map.ply and run report)");
  CommonOptions fuse_opts;
  std::string fuse_dataset_dir, fuse_out;
  bool fuse_vo = false;
  fuse->add_option("dataset", fuse_dataset_dir, "Dataset directory")->required();
  fuse->add_option("-o,--out", fuse_out, "Output directory")->required();
  fuse->add_flag("--vo", fuse_vo, "Estimate poses from landmark tracks instead of the pose log");
  add_common(fuse, fuse_opts);

  // features
  auto* features = app.add_subcommand("features", "Segment ground patches and compute features");
  CommonOptions feat_opts;
  std::string feat_dataset, feat_map, feat_out;
  bool feat_vo = false;
  features->add_option("dataset", feat_dataset, "Dataset directory")->required();
  features->add_option("--map", feat_map, "Directory written by `fuse` (skips fusion)")
      ->check(CLI::ExistingDirectory);
  features->add_option("-o,--out", feat_out, "Features CSV")->required();
  features->add_flag("--vo", feat_vo, "Visual odometry poses when fusing in memory");
  add_common(features, feat_opts);

  // detect
  auto* detect = app.add_subcommand("detect", "Run CUSUM change detection over a features CSV");
  CommonOptions det_opts;
  std::string det_in, det_out, det_plot;
  std::optional<double> det_h, det_k;
  std::optional<int> det_warmup;
  detect->add_option("features", det_in, "Features CSV")->required();
  detect->add_option("-o,--out", det_out, "Events CSV")->required();
  detect->add_option("--plot", det_plot, "Directory for per-feature PNG time series");
  detect->add_option("--cusum-h", det_h, "Alarm threshold (overrides config)");
  detect->add_option("--cusum-k", det_k, "Drift allowance (overrides config)");
  detect->add_option("--warmup", det_warmup, "Warmup samples (overrides config)");
  add_common(detect, det_opts);

  // export
  auto* exp = app.add_subcommand("export", "Render top-view PNGs of the map layers");
  std::string exp_map, exp_out;
  double exp_pixel = 0.01;
  exp->add_option("map", exp_map, "map.ply")->required()->check(CLI::ExistingFile);
  exp->add_option("-o,--out", exp_out, "Output directory")->required();
  exp->add_option("--pixel", exp_pixel, "Meters per pixel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      WorldSpec spec;
      if (!spec_path.empty()) {
        std::ifstream in(spec_path);
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::kParseError, spec_path + ": " + e.what());
        }
        spec = world_spec_from_json(doc);
      } else {
        spec = scenario(scenario_name);
      }
      if (synth_duration) spec.duration = *synth_duration;
      if (noiseless) {
        spec.noise.image_sigma = spec.noise.thermal_sigma = spec.noise.spectral_sigma = 0.0;
        spec.noise.texture = false;
        spec.noise.lateral_accel_sigma = 0.0;
      }
      std::uint64_t seed = 1;
      if (auto s = env_seed()) seed = *s;
      if (synth_seed) seed = *synth_seed;
      const World world(spec, seed);
      const GenerateReport r = generate_dataset(world, synth_out, synth_jobs);
      std::cout << "wrote " << r.counts.stereo << " stereo frames, " << r.counts.thermal
                << " thermal frames, " << r.counts.visnir << " VIS-NIR lines and " << r.counts.imu
                << " IMU samples to " << synth_out << '\n';
    } else if (*fuse) {
      PipelineConfig c = effective_config(fuse_opts);
      if (fuse_vo) c.vo = true;
      const FuseResult r = run_fuse(fuse_dataset_dir, c, fuse_out);
      print_warnings(r.warnings);
      std::cout << "fused " << r.frames.size() << " frames into " << r.map.size() << " points\n";
    } else if (*features) {
      PipelineConfig c = effective_config(feat_opts);
      if (feat_vo) c.vo = true;
      std::optional<fs::path> map_dir;
      if (!feat_map.empty()) map_dir = feat_map;
      const FeaturesResult r = run_features(feat_dataset, map_dir, c, feat_out);
      print_warnings(r.warnings);
      std::cout << "wrote " << r.rows.size() << " feature rows to " << feat_out << '\n';
    } else if (*detect) {
      PipelineConfig c = effective_config(det_opts);
      if (det_h) c.cusum.h = *det_h;
      if (det_k) c.cusum.k = *det_k;
      if (det_warmup) c.cusum.warmup = *det_warmup;
      c.validate();
      std::optional<fs::path> plot;
      if (!det_plot.empty()) plot = det_plot;
      const DetectResult r = run_detect(det_in, c, det_out, plot);
      std::cout << r.events.size() << " change events over " << r.rows.size() << " rows\n";
    } else if (*exp) {
      run_export(exp_map, exp_out, exp_pixel);
      std::cout << "wrote rgb.png, thermal.png and ndvi.png to " << exp_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
