#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fcooper/pipeline.hpp"

using namespace fcooper;

int main(int argc, char** argv) {
  CLI::App app{"Cooperative perception toolkit: feature fusion pipelines, "
               "feature message packing, and link budgeting"};
  app.require_subcommand(1);

  cli::RunConfig run;
  std::string strategy = "vff";
  std::string mask = "full";
  auto* pipeline = app.add_subcommand("pipeline", "run a full fusion pipeline on a scene");
  pipeline->add_option("--scene", run.scene_path, "scene JSON (default: built-in occlusion demo)");
  pipeline->add_option("--strategy", strategy, "raw|vff|sff")
      ->check(CLI::IsMember({"raw", "vff", "sff"}));
  pipeline->add_option("--mask", mask, "full|key|min|LO-HI channel mask");
  pipeline->add_option("--link", run.link_name, "dsrc|dsrc-low|mmwave")
      ->check(CLI::IsMember({"dsrc", "dsrc-low", "mmwave"}));
  pipeline->add_option("--seed", run.seed, "RNG seed (FCOOPER_SEED env as fallback)");
  pipeline->add_option("--out", run.out_dir, "output directory")->required();
  pipeline->add_option("--duration", run.duration_s, "exchange schedule duration, seconds");
  pipeline->add_option("--drift", run.drift_m, "GPS drift magnitude in meters; also runs the drift harness");
  pipeline->add_option("--drift-trials", run.drift_trials, "drift directions per run");
  pipeline->add_flag("--measure-timings", run.measure_timings,
                     "use stage timings measured on this host (timeline varies run to run)");

  cli::PackConfig pack;
  std::string pack_mask = "full";
  auto* packc = app.add_subcommand("pack", "encode a point file into a feature message");
  packc->add_option("--points", pack.points_path, "raw float32 x,y,z,reflectance file")->required();
  packc->add_option("--kind", pack.kind, "voxel|spatial")
      ->check(CLI::IsMember({"voxel", "spatial"}));
  packc->add_option("--mask", pack_mask, "channel mask for spatial messages");
  packc->add_option("--grid", pack.grid_name, "default|desk")
      ->check(CLI::IsMember({"default", "desk"}));
  packc->add_option("--seed", pack.seed, "encoder weight seed");
  packc->add_option("--out", pack.out_path, "output message file")->required();

  cli::UnpackConfig unpack;
  auto* unpackc = app.add_subcommand("unpack", "decode a feature message file");
  unpackc->add_option("--in", unpack.in_path, "message file")->required();
  unpackc->add_option("--out", unpack.out_dir, "output directory")->required();

  cli::ReportConfig report;
  auto* reportc = app.add_subcommand("report", "aggregate run CSVs into series files");
  reportc->add_option("--in", report.in_dir, "directory of pipeline runs")->required();
  reportc->add_option("--out", report.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pipeline->parsed()) {
      if (!pipeline->count("--seed")) run.seed = cli::seed_from_env_or(run.seed);
      run.strategy = netsim::parse_strategy(strategy);
      run.mask = fusion::ChannelMask::parse(mask);
      return cli::run_pipeline(run);
    }
    if (packc->parsed()) {
      pack.mask = fusion::ChannelMask::parse(pack_mask);
      return cli::run_pack(pack);
    }
    if (unpackc->parsed()) return cli::run_unpack(unpack);
    if (reportc->parsed()) return cli::run_report(report);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
