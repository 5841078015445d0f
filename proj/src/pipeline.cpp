#include "fcooper/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <zlib.h>

#include "fcooper/rng.hpp"
#include "fcooper/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fcooper::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << "\n";
  }
  void row(const std::string& line) { out_ << line << "\n"; }

 private:
  std::ofstream out_;
};

geom::Box3D to_receiver_frame(const geom::Box3D& b, const geom::RigidTransform2p5D& t) {
  geom::Box3D out = b;
  const geom::Point3 c = geom::apply_transform(t, {b.cx, b.cy, b.cz});
  out.cx = c.x;
  out.cy = c.y;
  out.cz = c.z;
  out.yaw = b.yaw + t.rotation;
  return out;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

uint64_t in_range_count(const voxel::VoxelGridSpec& grid, const voxel::PointCloud& cloud) {
  uint64_t n = 0;
  for (const auto& p : cloud)
    if (voxel::voxel_index(grid, p)) ++n;
  return n;
}

std::string precision_cell(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("NA");
}

void write_metrics_rows(CsvFile& csv, const std::string& scenario,
                        const std::string& strategy, const evalkit::PrecisionReport& rep) {
  csv.row(scenario + "," + strategy + ",near," + precision_cell(rep.near_pct) + "," +
          std::to_string(rep.near_tp) + "," + std::to_string(rep.near_fp) + "," +
          std::to_string(rep.truths_near));
  csv.row(scenario + "," + strategy + ",far," + precision_cell(rep.far_pct) + "," +
          std::to_string(rep.far_tp) + "," + std::to_string(rep.far_fp) + "," +
          std::to_string(rep.truths_far));
}

void write_detections(CsvFile& csv, const std::string& strategy,
                      const std::vector<evalkit::Detection>& dets) {
  for (const auto& d : dets) {
    csv.row(strategy + "," + fmt(d.box.cx) + "," + fmt(d.box.cy) + "," + fmt(d.box.cz) +
            "," + fmt(d.box.l) + "," + fmt(d.box.w) + "," + fmt(d.box.h) + "," +
            fmt(d.box.yaw) + "," + fmt(d.score));
  }
}

}  // namespace

uint64_t seed_from_env_or(uint64_t fallback) {
  if (const char* env = std::getenv("FCOOPER_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument("FCOOPER_SEED is not a number");
    }
  }
  return fallback;
}

evalkit::SceneConfig load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  json j;
  in >> j;

  evalkit::SceneConfig cfg;
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    const auto x = g.at("x_range");
    const auto y = g.at("y_range");
    const auto z = g.at("z_range");
    cfg.grid.x_min = x.at(0);
    cfg.grid.x_max = x.at(1);
    cfg.grid.y_min = y.at(0);
    cfg.grid.y_max = y.at(1);
    cfg.grid.z_min = z.at(0);
    cfg.grid.z_max = z.at(1);
    if (g.contains("voxel_size")) {
      cfg.grid.vx = g["voxel_size"].at(0);
      cfg.grid.vy = g["voxel_size"].at(1);
      cfg.grid.vz = g["voxel_size"].at(2);
    }
  }
  for (const auto& v : j.at("vehicles")) {
    cfg.vehicle_poses.push_back(
        {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>(),
         v.at(3).get<double>()});
  }
  for (const auto& b : j.at("boxes")) {
    const auto& c = b.at("center");
    const auto& s = b.at("size");
    cfg.boxes.push_back({c.at(0).get<double>(), c.at(1).get<double>(),
                         c.at(2).get<double>(), s.at(0).get<double>(),
                         s.at(1).get<double>(), s.at(2).get<double>(),
                         b.value("yaw", 0.0)});
  }
  if (j.contains("lidar")) {
    const auto& l = j["lidar"];
    cfg.beams = l.value("beams", cfg.beams);
    cfg.azimuth_step_deg = l.value("azimuth_step_deg", cfg.azimuth_step_deg);
    if (l.contains("elevation_deg")) {
      cfg.elevation_min_deg = l["elevation_deg"].at(0);
      cfg.elevation_max_deg = l["elevation_deg"].at(1);
    }
    cfg.max_range_m = l.value("max_range", cfg.max_range_m);
    cfg.reflectance = l.value("reflectance", cfg.reflectance);
  }
  cfg.grid.validate();
  if (cfg.vehicle_poses.size() < 2)
    throw std::runtime_error("scene file needs at least two vehicles");
  return cfg;
}

int run_pipeline(const RunConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();

  evalkit::SceneConfig scene_cfg = cfg.scene_path.empty()
                                       ? evalkit::occlusion_scene(cfg.seed)
                                       : load_scene(cfg.scene_path);
  const std::string scenario =
      cfg.scene_path.empty() ? "builtin-occlusion" : fs::path(cfg.scene_path).stem().string();

  const auto link = netsim::link_profile(cfg.link_name);
  const auto weights = encoder::EncoderWeights::from_seed(cfg.seed);
  const evalkit::Scene scene = evalkit::generate_scene(scene_cfg, cfg.seed);
  const size_t n_vehicles = scene_cfg.vehicle_poses.size();
  const geom::Pose receiver = scene_cfg.vehicle_poses[0];

  netsim::StageTimings timings = cfg.timings;

  // per-vehicle voxel features
  auto t0 = std::chrono::steady_clock::now();
  std::vector<voxel::VoxelFeatureStore> stores;
  stores.reserve(n_vehicles);
  for (size_t v = 0; v < n_vehicles; ++v) {
    stores.push_back(evalkit::encode_cloud(scene_cfg.grid, scene.clouds[v], weights,
                                           mix_seed(cfg.seed, 1 + v)));
  }
  if (cfg.measure_timings) timings.encode_s = elapsed_s(t0) / static_cast<double>(n_vehicles);

  // truths in the receiver frame
  const auto t_world = geom::relative_transform(receiver, geom::Pose{});
  std::vector<geom::Box3D> truths;
  for (const auto& b : scene_cfg.boxes) truths.push_back(to_receiver_frame(b, t_world));

  const evalkit::AnchorGrid anchors;

  // receiver-only baseline
  const auto map_r = encoder::spatial_features(stores[0], weights, receiver);
  const auto dets_base = evalkit::proxy_detect(map_r, anchors);
  const auto prec_base = evalkit::precision(dets_base, truths);

  fs::create_directories(cfg.out_dir);
  CsvFile sizes(fs::path(cfg.out_dir) / "sizes.csv",
                "strategy,sender,kind,logical_bytes,wire_bytes,ratio,raw_reference_bytes");

  // fuse per strategy, tracking the sender payloads
  auto t_pack = std::chrono::steady_clock::now();
  double pack_elapsed = 0.0;
  std::vector<uint64_t> payload_bytes;  // one per sender
  encoder::SpatialFeatureMap det_map;
  double fuse_elapsed = 0.0;

  const std::string strat = netsim::strategy_name(cfg.strategy);
  switch (cfg.strategy) {
    case netsim::Strategy::Raw: {
      voxel::PointCloud merged = scene.clouds[0];
      for (size_t v = 1; v < n_vehicles; ++v) {
        const auto t = geom::relative_transform(receiver, scene_cfg.vehicle_poses[v]);
        t_pack = std::chrono::steady_clock::now();
        voxel::PointCloud in_range;
        for (const auto& p : scene.clouds[v]) {
          const geom::Point3 q = geom::apply_transform(t, {p.x, p.y, p.z});
          const voxel::PointXYZR tp{static_cast<float>(q.x), static_cast<float>(q.y),
                                    static_cast<float>(q.z), p.r};
          if (voxel::voxel_index(scene_cfg.grid, tp)) in_range.push_back(tp);
        }
        std::vector<uint8_t> body(in_range.size() * wire::kRawPointBytes);
        if (!in_range.empty()) std::memcpy(body.data(), in_range.data(), body.size());
        const auto compressed = wire::compress(body);
        pack_elapsed += elapsed_s(t_pack);
        payload_bytes.push_back(compressed.size());
        sizes.row(strat + "," + std::to_string(v) + ",raw," + std::to_string(body.size()) +
                  "," + std::to_string(compressed.size()) + "," +
                  fmt(body.empty() ? 1.0
                                   : static_cast<double>(compressed.size()) /
                                         static_cast<double>(body.size())) +
                  "," + std::to_string(body.size()));
        merged.insert(merged.end(), in_range.begin(), in_range.end());
      }
      const auto fused =
          evalkit::encode_cloud(scene_cfg.grid, merged, weights, mix_seed(cfg.seed, 90));
      t0 = std::chrono::steady_clock::now();
      det_map = encoder::spatial_features(fused, weights, receiver);
      fuse_elapsed = elapsed_s(t0);
      break;
    }
    case netsim::Strategy::VFF: {
      voxel::VoxelFeatureStore fused = stores[0];
      for (size_t v = 1; v < n_vehicles; ++v) {
        t_pack = std::chrono::steady_clock::now();
        const auto msg = wire::make_voxel_message(stores[v], scene_cfg.vehicle_poses[v]);
        const auto rep =
            wire::size_report(msg, in_range_count(scene_cfg.grid, scene.clouds[v]));
        pack_elapsed += elapsed_s(t_pack);
        payload_bytes.push_back(rep.wire_bytes);
        sizes.row(strat + "," + std::to_string(v) + ",voxel," +
                  std::to_string(rep.logical_bytes) + "," + std::to_string(rep.wire_bytes) +
                  "," + fmt(rep.ratio) + "," + std::to_string(rep.raw_reference_bytes));
        t0 = std::chrono::steady_clock::now();
        const auto t = geom::relative_transform(receiver, scene_cfg.vehicle_poses[v]);
        fused = fusion::vff(fused, stores[v], t);
        fuse_elapsed += elapsed_s(t0);
      }
      det_map = encoder::spatial_features(fused, weights, receiver);
      break;
    }
    case netsim::Strategy::SFF: {
      det_map = encoder::spatial_features(stores[0], weights, receiver);
      for (size_t v = 1; v < n_vehicles; ++v) {
        const auto map_s =
            encoder::spatial_features(stores[v], weights, scene_cfg.vehicle_poses[v]);
        t_pack = std::chrono::steady_clock::now();
        const auto msg =
            wire::make_spatial_message(map_s, cfg.mask, scene_cfg.vehicle_poses[v]);
        const auto rep =
            wire::size_report(msg, in_range_count(scene_cfg.grid, scene.clouds[v]));
        pack_elapsed += elapsed_s(t_pack);
        payload_bytes.push_back(rep.wire_bytes);
        sizes.row(strat + "," + std::to_string(v) + ",spatial," +
                  std::to_string(rep.logical_bytes) + "," + std::to_string(rep.wire_bytes) +
                  "," + fmt(rep.ratio) + "," + std::to_string(rep.raw_reference_bytes));
        t0 = std::chrono::steady_clock::now();
        det_map = fusion::sff(det_map, map_s, receiver, scene_cfg.vehicle_poses[v], cfg.mask);
        fuse_elapsed += elapsed_s(t0);
      }
      break;
    }
  }
  if (cfg.measure_timings) {
    timings.pack_s = pack_elapsed / std::max<size_t>(1, n_vehicles - 1);
    timings.fuse_s = std::max(fuse_elapsed, 1e-6);
  }

  t0 = std::chrono::steady_clock::now();
  const auto dets = evalkit::proxy_detect(det_map, anchors);
  if (cfg.measure_timings) timings.detect_s = std::max(elapsed_s(t0), 1e-6);
  const auto prec = evalkit::precision(dets, truths);

  {
    CsvFile detections(fs::path(cfg.out_dir) / "detections.csv",
                       "strategy,cx,cy,cz,l,w,h,yaw,score");
    write_detections(detections, "baseline", dets_base);
    write_detections(detections, strat, dets);
  }
  {
    CsvFile metrics(fs::path(cfg.out_dir) / "metrics.csv",
                    "scenario,strategy,bucket,precision_pct,tp,fp,truths");
    write_metrics_rows(metrics, scenario, "baseline", prec_base);
    write_metrics_rows(metrics, scenario, strat, prec);
  }

  // link budget and the 1 Hz exchange timeline
  netsim::SceneStats stats;
  stats.payload_bytes = payload_bytes.empty() ? 0 : payload_bytes[0];
  stats.in_range_points = in_range_count(scene_cfg.grid, scene.clouds.back());
  stats.voxel_count = stores.back().entries.size();
  const auto budget = netsim::latency_budget(cfg.strategy, stats, link, timings);
  {
    CsvFile bcsv(fs::path(cfg.out_dir) / "budget.csv", "strategy,stage,seconds,payload_bytes");
    bcsv.row(strat + ",encode," + fmt(budget.encode_s) + ",0");
    bcsv.row(strat + ",pack," + fmt(budget.pack_s) + ",0");
    bcsv.row(strat + ",transmit," + fmt(budget.transmit_s) + "," +
             std::to_string(budget.payload_bytes));
    bcsv.row(strat + ",fuse," + fmt(budget.fuse_s) + ",0");
    bcsv.row(strat + ",detect," + fmt(budget.detect_s) + ",0");
    bcsv.row(strat + ",result_return," + fmt(budget.result_return_s) + "," +
             std::to_string(stats.result_bytes));
    bcsv.row(strat + ",total," + fmt(budget.total_s) + "," +
             std::to_string(budget.payload_bytes));
    bcsv.row(strat + ",vehicle_side," + fmt(budget.vehicle_side_s) + "," +
             std::to_string(budget.payload_bytes));
  }

  netsim::ScenarioConfig sim;
  for (size_t v = 1; v < n_vehicles; ++v) {
    sim.vehicles.push_back({"vehicle" + std::to_string(v), payload_bytes[v - 1]});
  }
  sim.link = link;
  sim.timings = timings;
  sim.duration_s = cfg.duration_s;
  sim.seed = cfg.seed;
  const auto sim_result = netsim::run_scenario(sim);
  {
    CsvFile timeline(fs::path(cfg.out_dir) / "timeline.csv", "time_us,actor,kind,bytes,stage");
    for (const auto& e : sim_result.log) {
      timeline.row(std::to_string(e.time_us) + "," + e.actor + "," +
                   netsim::event_name(e.kind) + "," + std::to_string(e.bytes) + "," + e.stage);
    }
  }

  if (cfg.drift_m >= 0.0) {
    const auto drift = evalkit::drift_experiment(scene_cfg, weights, cfg.drift_m,
                                                 cfg.drift_trials, mix_seed(cfg.seed, 7));
    CsvFile dcsv(fs::path(cfg.out_dir) / "drift.csv",
                 "trial,paradigm,target,baseline_score,drifted_score,delta,missed,gained");
    auto rows = [&](int trial, const char* paradigm,
                    const std::vector<evalkit::TargetScore>& base,
                    const std::vector<evalkit::TargetScore>& cur) {
      for (size_t i = 0; i < base.size(); ++i) {
        const bool missed = base[i].detected && !cur[i].detected;
        const bool gained = !base[i].detected && cur[i].detected;
        dcsv.row(std::to_string(trial) + "," + paradigm + "," + std::to_string(int(i)) + "," +
                 fmt(base[i].score) + "," + fmt(cur[i].score) + "," +
                 fmt(cur[i].score - base[i].score) + "," + (missed ? "1" : "0") + "," +
                 (gained ? "1" : "0"));
      }
    };
    for (size_t t = 0; t < drift.trials.size(); ++t) {
      rows(static_cast<int>(t), "vff", drift.baseline_vff, drift.trials[t].vff);
      rows(static_cast<int>(t), "sff", drift.baseline_sff, drift.trials[t].sff);
    }
  }

  std::printf("pipeline %s: %zu vehicles, %zu detections, %.1f s\n", strat.c_str(),
              n_vehicles, dets.size(), elapsed_s(t_start));
  return 0;
}

int run_pack(const PackConfig& cfg) {
  const auto cloud = voxel::read_point_file(cfg.points_path);
  voxel::VoxelGridSpec grid;
  if (cfg.grid_name == "default")
    grid = voxel::default_grid();
  else if (cfg.grid_name == "desk")
    grid = voxel::desk_grid();
  else
    throw std::invalid_argument("unknown grid preset: " + cfg.grid_name);

  const auto weights = encoder::EncoderWeights::from_seed(cfg.seed);
  const auto store = evalkit::encode_cloud(grid, cloud, weights, cfg.seed);

  wire::FeatureMessage msg;
  if (cfg.kind == "voxel") {
    msg = wire::make_voxel_message(store, geom::Pose{});
  } else if (cfg.kind == "spatial") {
    const auto map = encoder::spatial_features(store, weights);
    msg = wire::make_spatial_message(map, cfg.mask, geom::Pose{});
  } else {
    throw std::invalid_argument("unknown pack kind: " + cfg.kind);
  }

  const auto bytes = wire::encode_message(msg);
  std::ofstream out(cfg.out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + cfg.out_path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write on " + cfg.out_path);

  const auto rep = wire::size_report(msg, in_range_count(grid, cloud));
  std::printf("packed %s: logical %llu B, wire %llu B, ratio %.4f\n", cfg.kind.c_str(),
              static_cast<unsigned long long>(rep.logical_bytes),
              static_cast<unsigned long long>(rep.wire_bytes), rep.ratio);
  return 0;
}

int run_unpack(const UnpackConfig& cfg) {
  std::ifstream in(cfg.in_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + cfg.in_path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  const auto msg = wire::decode_message(bytes);  // throws on corruption
  const auto body = wire::pack_body(msg);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "body.bin", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("cannot write body.bin");
  }
  json manifest;
  manifest["kind"] = static_cast<int>(msg.kind);
  manifest["entry_count"] = msg.entry_count();
  manifest["sender_pose"] = {msg.sender_pose.x, msg.sender_pose.y, msg.sender_pose.z,
                             msg.sender_pose.yaw};
  manifest["grid"] = {{"x_range", {msg.grid.x_min, msg.grid.x_max}},
                      {"y_range", {msg.grid.y_min, msg.grid.y_max}},
                      {"z_range", {msg.grid.z_min, msg.grid.z_max}},
                      {"voxel_size", {msg.grid.vx, msg.grid.vy, msg.grid.vz}}};
  manifest["mask_channels"] = msg.mask.channels();
  manifest["body_bytes"] = body.size();
  manifest["body_crc32"] =
      static_cast<uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size())));
  {
    std::ofstream out(fs::path(cfg.out_dir) / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest.json");
  }
  std::printf("unpacked kind %d, %u entries, body %zu B\n", static_cast<int>(msg.kind),
              msg.entry_count(), body.size());
  return 0;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct Accum {
  double sum = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
};

}  // namespace

int run_report(const ReportConfig& cfg) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(cfg.in_dir))
    throw std::runtime_error("report: not a directory: " + cfg.in_dir);
  if (fs::exists(fs::path(cfg.in_dir) / "metrics.csv")) dirs.push_back(cfg.in_dir);
  for (const auto& e : fs::directory_iterator(cfg.in_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("report: no run CSVs under " + cfg.in_dir);

  std::map<std::string, Accum> precision_series;  // strategy,bucket
  std::map<std::string, std::array<Accum, 3>> size_series;  // strategy,kind -> logical, wire, ratio
  std::map<std::string, Accum> latency_series;  // strategy,stage

  for (const auto& dir : dirs) {
    std::ifstream metrics(dir / "metrics.csv");
    std::string line;
    std::getline(metrics, line);  // header
    while (std::getline(metrics, line)) {
      const auto f = split_csv(line);
      if (f.size() < 4 || f[3] == "NA") continue;
      precision_series[f[1] + "," + f[2]].add(std::stod(f[3]));
    }
    std::ifstream sizesf(dir / "sizes.csv");
    if (sizesf) {
      std::getline(sizesf, line);
      while (std::getline(sizesf, line)) {
        const auto f = split_csv(line);
        if (f.size() < 6) continue;
        auto& acc = size_series[f[0] + "," + f[2]];
        acc[0].add(std::stod(f[3]));
        acc[1].add(std::stod(f[4]));
        acc[2].add(std::stod(f[5]));
      }
    }
    std::ifstream budgetf(dir / "budget.csv");
    if (budgetf) {
      std::getline(budgetf, line);
      while (std::getline(budgetf, line)) {
        const auto f = split_csv(line);
        if (f.size() < 3) continue;
        latency_series[f[0] + "," + f[1]].add(std::stod(f[2]));
      }
    }
  }

  fs::create_directories(cfg.out_dir);
  {
    CsvFile out(fs::path(cfg.out_dir) / "series_precision.csv",
                "strategy,bucket,mean_precision_pct,runs");
    for (const auto& [k, a] : precision_series)
      out.row(k + "," + fmt(a.mean()) + "," + std::to_string(a.n));
  }
  {
    CsvFile out(fs::path(cfg.out_dir) / "series_sizes.csv",
                "strategy,kind,mean_logical_bytes,mean_wire_bytes,mean_ratio,runs");
    for (const auto& [k, a] : size_series)
      out.row(k + "," + fmt(a[0].mean()) + "," + fmt(a[1].mean()) + "," + fmt(a[2].mean()) +
              "," + std::to_string(a[0].n));
  }
  {
    CsvFile out(fs::path(cfg.out_dir) / "series_latency.csv",
                "strategy,stage,mean_seconds,runs");
    for (const auto& [k, a] : latency_series)
      out.row(k + "," + fmt(a.mean()) + "," + std::to_string(a.n));
  }
  std::printf("report: aggregated %zu run(s)\n", dirs.size());
  return 0;
}

}  // namespace fcooper::cli
