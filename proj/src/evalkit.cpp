#include "fcooper/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fcooper/rng.hpp"

namespace fcooper::evalkit {

double AnchorGrid::diag() const { return std::sqrt(length * length + width * width); }

std::array<double, 7> delta_encode(const geom::Box3D& p, const geom::Box3D& g) {
  if (!(p.l > 0 && p.w > 0 && p.h > 0 && g.l > 0 && g.w > 0 && g.h > 0))
    throw std::invalid_argument("delta_encode: non-positive extent");
  const double pd = std::sqrt(p.l * p.l + p.w * p.w);
  return {(g.cx - p.cx) / pd, (g.cy - p.cy) / pd, (g.cz - p.cz) / p.h,
          std::log(g.l / p.l), std::log(g.w / p.w), std::log(g.h / p.h),
          g.yaw - p.yaw};
}

geom::Box3D delta_decode(const geom::Box3D& p, const std::array<double, 7>& d) {
  if (!(p.l > 0 && p.w > 0 && p.h > 0))
    throw std::invalid_argument("delta_decode: non-positive anchor extent");
  const double pd = std::sqrt(p.l * p.l + p.w * p.w);
  geom::Box3D g;
  g.cx = p.cx + d[0] * pd;
  g.cy = p.cy + d[1] * pd;
  g.cz = p.cz + d[2] * p.h;
  g.l = p.l * std::exp(d[3]);
  g.w = p.w * std::exp(d[4]);
  g.h = p.h * std::exp(d[5]);
  g.yaw = p.yaw + d[6];
  return g;
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double binary_cross_entropy(double p, int label) {
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

double loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
            std::span<const geom::Box3D> pred, std::span<const geom::Box3D> truth,
            std::span<const geom::Box3D> anchors, const LossConfig& cfg) {
  if (!(cfg.alpha > 0 && cfg.beta > 0))
    throw std::invalid_argument("loss: alpha and beta must be positive");
  if (pred.size() != truth.size() || pred.size() != anchors.size())
    throw std::invalid_argument("loss: box list sizes differ");
  if (pos_scores.size() != pred.size())
    throw std::invalid_argument("loss: positive score count must match boxes");
  if (pos_scores.empty() && !pred.empty())
    throw std::invalid_argument("loss: regression targets without positives");

  double total = 0.0;
  if (!neg_scores.empty()) {
    double s = 0.0;
    for (double p : neg_scores) s += binary_cross_entropy(p, 0);
    total += cfg.alpha * s / static_cast<double>(neg_scores.size());
  }
  if (!pos_scores.empty()) {
    double s = 0.0;
    for (double p : pos_scores) s += binary_cross_entropy(p, 1);
    total += cfg.beta * s / static_cast<double>(pos_scores.size());

    double reg = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
      const auto dp = delta_encode(anchors[i], pred[i]);
      const auto dt = delta_encode(anchors[i], truth[i]);
      for (int k = 0; k < 7; ++k) reg += smooth_l1(dp[k] - dt[k]);
    }
    total += reg / static_cast<double>(pos_scores.size());
  }
  return total;
}

namespace {

double squash(double e, double k) { return 2.0 / (1.0 + std::exp(-2.0 * k * e)) - 1.0; }

}  // namespace

std::vector<AnchorScore> anchor_scores(const encoder::SpatialFeatureMap& map,
                                       const AnchorGrid& grid) {
  const int H = map.height, W = map.width;
  const double cell = map.cell;
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(kFeatureDim));

  std::vector<double> energy(static_cast<size_t>(H) * W, 0.0);
#pragma omp parallel for schedule(static)
  for (int hy = 0; hy < H; ++hy) {
    for (int c = 0; c < map.channels; ++c) {
      const float* row = map.plane(c) + static_cast<size_t>(hy) * W;
      double* erow = energy.data() + static_cast<size_t>(hy) * W;
      for (int wx = 0; wx < W; ++wx) {
        const double v = row[wx];
        erow[wx] += v * v;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int hy = 0; hy < H; ++hy) {
    double* erow = energy.data() + static_cast<size_t>(hy) * W;
    for (int wx = 0; wx < W; ++wx) erow[wx] = std::sqrt(erow[wx]) * inv_sqrt_c;
  }

  std::vector<AnchorScore> out;
  const int stride = std::max(1, grid.stride_cells);
  for (int hy = stride / 2; hy < H; hy += stride) {
    for (int wx = stride / 2; wx < W; wx += stride) {
      const double cx = map.x_min + (wx + 0.5) * cell;
      const double cy = map.y_min + (hy + 0.5) * cell;
      for (int yi = 0; yi < static_cast<int>(grid.yaws.size()); ++yi) {
        const double yaw = grid.yaws[yi];
        const double ca = std::abs(std::cos(yaw)), sa = std::abs(std::sin(yaw));
        const double half_x = 0.5 * (ca * grid.length + sa * grid.width);
        const double half_y = 0.5 * (sa * grid.length + ca * grid.width);
        const int x0 = std::max(0, static_cast<int>(std::floor((cx - half_x - map.x_min) / cell)));
        const int x1 = std::min(W - 1, static_cast<int>(std::floor((cx + half_x - map.x_min) / cell)));
        const int y0 = std::max(0, static_cast<int>(std::floor((cy - half_y - map.y_min) / cell)));
        const int y1 = std::min(H - 1, static_cast<int>(std::floor((cy + half_y - map.y_min) / cell)));
        double sum = 0.0;
        int cells = 0;
        for (int y = y0; y <= y1; ++y) {
          const double* erow = energy.data() + static_cast<size_t>(y) * W;
          for (int x = x0; x <= x1; ++x) {
            sum += erow[x];
            ++cells;
          }
        }
        AnchorScore s;
        s.hy = hy;
        s.wx = wx;
        s.yaw_index = yi;
        s.score = cells > 0 ? squash(sum / cells, grid.score_scale) : 0.0;
        s.box = {cx, cy, grid.z_center, grid.length, grid.width, grid.height, yaw};
        out.push_back(s);
      }
    }
  }
  return out;
}

std::vector<Detection> proxy_detect(const encoder::SpatialFeatureMap& map,
                                    const AnchorGrid& grid, double threshold) {
  auto scored = anchor_scores(map, grid);
  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scored[a].score > scored[b].score;
  });

  std::vector<Detection> dets;
  for (size_t i : order) {
    const AnchorScore& s = scored[i];
    if (s.score <= threshold) break;
    bool suppressed = false;
    for (const Detection& kept : dets) {
      if (geom::iou_bev(kept.box, s.box) >= 0.5) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) dets.push_back({s.box, s.score});
  }
  return dets;
}

PrecisionReport precision(const std::vector<Detection>& dets,
                          const std::vector<geom::Box3D>& truths, double iou_thresh,
                          double near_cut) {
  PrecisionReport rep;
  auto bev_dist = [](double x, double y) { return std::sqrt(x * x + y * y); };
  for (const auto& t : truths) {
    if (bev_dist(t.cx, t.cy) <= near_cut)
      ++rep.truths_near;
    else
      ++rep.truths_far;
  }

  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return dets[a].score > dets[b].score; });

  std::vector<bool> taken(truths.size(), false);
  for (size_t i : order) {
    const Detection& d = dets[i];
    double best = 0.0;
    int best_j = -1;
    for (size_t j = 0; j < truths.size(); ++j) {
      if (taken[j]) continue;
      const double v = geom::iou_3d(d.box, truths[j]);
      if (v > best) {
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best >= iou_thresh) {
      taken[static_cast<size_t>(best_j)] = true;
      const auto& t = truths[static_cast<size_t>(best_j)];
      (bev_dist(t.cx, t.cy) <= near_cut ? rep.near_tp : rep.far_tp) += 1;
    } else {
      (bev_dist(d.box.cx, d.box.cy) <= near_cut ? rep.near_fp : rep.far_fp) += 1;
    }
  }
  if (rep.near_tp + rep.near_fp > 0)
    rep.near_pct = 100.0 * rep.near_tp / static_cast<double>(rep.near_tp + rep.near_fp);
  if (rep.far_tp + rep.far_fp > 0)
    rep.far_pct = 100.0 * rep.far_tp / static_cast<double>(rep.far_tp + rep.far_fp);
  return rep;
}

namespace {

struct LocalBox {
  geom::Box3D box;
  double cos_yaw, sin_yaw;
};

// nearest positive hit of a ray from the origin, slab test in box frame
bool ray_box(const LocalBox& b, double dx, double dy, double dz, double max_t,
             double& t_hit) {
  const double ox = -(b.cos_yaw * b.box.cx + b.sin_yaw * b.box.cy);
  const double oy = -(-b.sin_yaw * b.box.cx + b.cos_yaw * b.box.cy);
  const double oz = -b.box.cz;
  const double rdx = b.cos_yaw * dx + b.sin_yaw * dy;
  const double rdy = -b.sin_yaw * dx + b.cos_yaw * dy;
  const double half[3] = {0.5 * b.box.l, 0.5 * b.box.w, 0.5 * b.box.h};
  const double o[3] = {ox, oy, oz};
  const double d[3] = {rdx, rdy, dz};
  double tmin = 1e-3, tmax = max_t;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > half[a]) return false;
      continue;
    }
    double t1 = (-half[a] - o[a]) / d[a];
    double t2 = (half[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  t_hit = tmin;
  return true;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, uint64_t seed) {
  if (cfg.vehicle_poses.size() < 2)
    throw std::invalid_argument("scene: at least two vehicles required");
  if (!(cfg.beams >= 1 && cfg.azimuth_step_deg > 0.0 && cfg.max_range_m > 0.0))
    throw std::invalid_argument("scene: bad lidar configuration");
  for (const auto& b : cfg.boxes)
    if (!(b.l > 0 && b.w > 0 && b.h > 0))
      throw std::invalid_argument("scene: degenerate box");
  cfg.grid.validate();

  Scene scene;
  scene.config = cfg;
  SplitMix64 rng(mix_seed(seed, 0x5ce6e));

  const double deg = geom::kPi / 180.0;
  const int az_steps = static_cast<int>(std::floor(360.0 / cfg.azimuth_step_deg));

  for (const geom::Pose& pose : cfg.vehicle_poses) {
    // boxes into this vehicle's sensor frame
    const geom::RigidTransform2p5D t = geom::relative_transform(pose, geom::Pose{});
    std::vector<LocalBox> boxes;
    boxes.reserve(cfg.boxes.size());
    for (const geom::Box3D& b : cfg.boxes) {
      geom::Box3D lb = b;
      const geom::Point3 c = geom::apply_transform(t, {b.cx, b.cy, b.cz});
      lb.cx = c.x;
      lb.cy = c.y;
      lb.cz = c.z;
      lb.yaw = b.yaw + t.rotation;
      boxes.push_back({lb, std::cos(lb.yaw), std::sin(lb.yaw)});
    }

    const double phase = rng.next_unit() * cfg.azimuth_step_deg;
    voxel::PointCloud cloud;
    for (int bi = 0; bi < cfg.beams; ++bi) {
      const double el =
          cfg.beams == 1
              ? cfg.elevation_min_deg
              : cfg.elevation_min_deg + bi * (cfg.elevation_max_deg - cfg.elevation_min_deg) /
                                            (cfg.beams - 1);
      const double ce = std::cos(el * deg), se = std::sin(el * deg);
      for (int ai = 0; ai < az_steps; ++ai) {
        const double az = (phase + ai * cfg.azimuth_step_deg) * deg;
        const double dx = ce * std::cos(az), dy = ce * std::sin(az), dz = se;
        double best = cfg.max_range_m;
        bool hit = false;
        for (const LocalBox& b : boxes) {
          double th;
          if (ray_box(b, dx, dy, dz, best, th) && th < best) {
            best = th;
            hit = true;
          }
        }
        if (hit) {
          cloud.push_back({static_cast<float>(dx * best), static_cast<float>(dy * best),
                           static_cast<float>(dz * best),
                           static_cast<float>(cfg.reflectance)});
        }
      }
    }
    scene.clouds.push_back(std::move(cloud));
  }
  return scene;
}

SceneConfig occlusion_scene(uint64_t seed) {
  SplitMix64 rng(mix_seed(seed, 0x0cc1d));
  auto jitter = [&](double amp) { return (2.0 * rng.next_unit() - 1.0) * amp; };

  SceneConfig cfg;
  cfg.grid.x_min = 0.0;
  cfg.grid.x_max = 19.2;
  cfg.grid.y_min = -9.6;
  cfg.grid.y_max = 9.6;

  const double tx = 14.0 + jitter(0.3);
  const double ty = 0.0 + jitter(0.2);

  cfg.vehicle_poses.push_back({0.0, 0.0, 0.0, 0.0});
  cfg.vehicle_poses.push_back({tx + jitter(0.4), -12.0 + jitter(0.5), 0.0, geom::kPi / 2.0});

  const double bz = -1.2, bh = 1.6;
  // target, partially occluded from both vantages
  cfg.boxes.push_back({tx, ty, bz, 4.5, 2.0, bh, 0.0});
  // receiver-side occluder, offset so a sliver of the target face stays visible
  cfg.boxes.push_back({8.0 + jitter(0.2), ty + 0.9 + jitter(0.1), bz, 4.5, 2.0, bh, 0.0});
  // sender-side occluder
  cfg.boxes.push_back({tx + 2.0 + jitter(0.2), -6.0 + jitter(0.3), bz, 4.5, 2.0, bh, 0.0});
  // fully visible reference box
  cfg.boxes.push_back({5.5 + jitter(0.3), -4.0 + jitter(0.3), bz, 4.5, 2.0, bh, 0.0});
  return cfg;
}

voxel::VoxelFeatureStore encode_cloud(const voxel::VoxelGridSpec& grid,
                                      const voxel::PointCloud& cloud,
                                      const encoder::EncoderWeights& weights,
                                      uint64_t seed) {
  auto buckets = voxel::bucket_points(grid, cloud);
  for (auto& [key, pts] : buckets) {
    if (pts.size() > static_cast<size_t>(voxel::kSampleCap))
      pts = voxel::sample_voxel(pts, voxel::kSampleCap, mix_seed(seed, key));
  }
  return encoder::encode_voxels(grid, buckets, weights);
}

namespace {

std::vector<TargetScore> score_targets(const std::vector<Detection>& dets,
                                       const std::vector<geom::Box3D>& truths) {
  std::vector<TargetScore> out;
  out.reserve(truths.size());
  for (size_t j = 0; j < truths.size(); ++j) {
    TargetScore ts;
    ts.target = static_cast<int>(j);
    for (const Detection& d : dets) {
      if (geom::iou_bev(d.box, truths[j]) >= 0.3 && d.score > ts.score) {
        ts.score = d.score;
        ts.detected = true;
      }
    }
    out.push_back(ts);
  }
  return out;
}

}  // namespace

DriftReport drift_experiment(const SceneConfig& scene_cfg,
                             const encoder::EncoderWeights& weights, double drift_m,
                             int trials, uint64_t seed) {
  if (drift_m < 0.0) throw std::invalid_argument("drift: negative drift");
  if (trials < 1) throw std::invalid_argument("drift: trials must be >= 1");

  const Scene scene = generate_scene(scene_cfg, seed);
  const geom::Pose receiver = scene_cfg.vehicle_poses[0];
  const geom::Pose sender = scene_cfg.vehicle_poses[1];

  const auto store_r = encode_cloud(scene_cfg.grid, scene.clouds[0], weights, mix_seed(seed, 1));
  const auto store_s = encode_cloud(scene_cfg.grid, scene.clouds[1], weights, mix_seed(seed, 2));
  const auto map_r = encoder::spatial_features(store_r, weights, receiver);
  const auto map_s = encoder::spatial_features(store_s, weights, sender);

  // truths in the receiver frame
  const geom::RigidTransform2p5D t_w = geom::relative_transform(receiver, geom::Pose{});
  std::vector<geom::Box3D> truths;
  for (const geom::Box3D& b : scene_cfg.boxes) {
    geom::Box3D lb = b;
    const geom::Point3 c = geom::apply_transform(t_w, {b.cx, b.cy, b.cz});
    lb.cx = c.x;
    lb.cy = c.y;
    lb.cz = c.z;
    lb.yaw = b.yaw + t_w.rotation;
    truths.push_back(lb);
  }

  const AnchorGrid anchors;
  const auto full = fusion::ChannelMask::full();

  auto eval_vff = [&](const geom::Pose& sender_reported) {
    const auto t = geom::relative_transform(receiver, sender_reported);
    const auto fused = fusion::vff(store_r, store_s, t);
    const auto map = encoder::spatial_features(fused, weights, receiver);
    return score_targets(proxy_detect(map, anchors), truths);
  };
  auto eval_sff = [&](const geom::Pose& sender_reported) {
    const auto canvas = fusion::sff(map_r, map_s, receiver, sender_reported, full);
    return score_targets(proxy_detect(canvas, anchors), truths);
  };

  DriftReport rep;
  rep.drift_m = drift_m;
  rep.baseline_vff = eval_vff(sender);
  rep.baseline_sff = eval_sff(sender);

  SplitMix64 rng(mix_seed(seed, 0xd81f7));
  for (int i = 0; i < trials; ++i) {
    const double phi = rng.next_unit() * 2.0 * geom::kPi;
    DriftTrial trial;
    trial.dx = drift_m * std::cos(phi);
    trial.dy = drift_m * std::sin(phi);
    geom::Pose p = sender;
    p.x += trial.dx;
    p.y += trial.dy;
    trial.vff = eval_vff(p);
    trial.sff = eval_sff(p);
    rep.trials.push_back(std::move(trial));
  }
  return rep;
}

}  // namespace fcooper::evalkit
