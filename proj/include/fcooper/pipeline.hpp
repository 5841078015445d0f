#pragma once

#include <cstdint>
#include <string>

#include "fcooper/evalkit.hpp"
#include "fcooper/fusion.hpp"
#include "fcooper/netsim.hpp"

namespace fcooper::cli {

// Global knobs shared by the subcommands. Defaults reproduce the stock
// constants: full detection-range grid, 1 Hz exchange, 27 Mb/s link,
// full channel mask.
struct RunConfig {
  std::string scene_path;  // empty runs the built-in occlusion demo scene
  netsim::Strategy strategy = netsim::Strategy::VFF;
  fusion::ChannelMask mask = fusion::ChannelMask::full();
  std::string link_name = "dsrc";
  uint64_t seed = 1;
  std::string out_dir = "out";
  double duration_s = 5.0;
  double drift_m = -1.0;  // >= 0 also runs the drift harness
  int drift_trials = 8;
  bool measure_timings = false;  // stage timings from this host instead of the configured constants
  netsim::StageTimings timings;
};

struct PackConfig {
  std::string points_path;
  std::string kind = "voxel";  // "voxel" | "spatial"
  fusion::ChannelMask mask = fusion::ChannelMask::full();
  std::string grid_name = "default";  // "default" | "desk"
  uint64_t seed = 1;
  std::string out_path;
};

struct UnpackConfig {
  std::string in_path;
  std::string out_dir;
};

struct ReportConfig {
  std::string in_dir;
  std::string out_dir;
};

// generate -> voxelize -> encode -> fuse -> detect -> evaluate -> link
// budget; writes detections.csv, metrics.csv, sizes.csv, timeline.csv,
// budget.csv (and drift.csv when requested) under out_dir.
int run_pipeline(const RunConfig& cfg);

// point file -> feature message file (with a printed size report)
int run_pack(const PackConfig& cfg);

// message file -> manifest.json + body.bin; nonzero on a corrupt stream
int run_unpack(const UnpackConfig& cfg);

// aggregate run CSVs into per-strategy series files
int run_report(const ReportConfig& cfg);

// scene JSON; grid/lidar blocks optional
evalkit::SceneConfig load_scene(const std::string& path);

// FCOOPER_SEED when set, else the fallback
uint64_t seed_from_env_or(uint64_t fallback);

}  // namespace fcooper::cli
