#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fcooper/encoder.hpp"
#include "fcooper/fusion.hpp"
#include "fcooper/geom.hpp"
#include "fcooper/voxel.hpp"

namespace fcooper::evalkit {

// Templated candidate boxes laid over the BEV grid every stride_cells
// cells, one per yaw in `yaws`. diag() is the anchor's BEV diagonal,
// the normalizer of the position deltas.
struct AnchorGrid {
  int stride_cells = 2;
  double length = 4.6, width = 2.0, height = 1.7;
  double z_center = -1.2;
  std::array<double, 2> yaws{0.0, geom::kPi / 2.0};

  // slope of the score squash; see anchor_scores
  double score_scale = 4.0;

  double diag() const;
};

struct Detection {
  geom::Box3D box;
  double score = 0.0;
};

struct LossConfig {
  double alpha = 1.0;  // negative classification weight
  double beta = 1.0;   // positive classification weight
};

// Box regression deltas: positions normalized by the anchor diagonal
// (z by the anchor height), extents as log ratios, yaw as a difference.
std::array<double, 7> delta_encode(const geom::Box3D& anchor, const geom::Box3D& truth);
geom::Box3D delta_decode(const geom::Box3D& anchor, const std::array<double, 7>& delta);

// 0.5 x^2 below |x| = 1, |x| - 0.5 beyond
double smooth_l1(double x);
// -(y ln p + (1-y) ln(1-p)) with p clamped 1e-7 from the boundaries
double binary_cross_entropy(double p, int label);

// alpha * mean BCE(neg, 0) + beta * mean BCE(pos, 1) + mean over
// positives of smooth-L1 summed over the 7 delta components.
double loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
            std::span<const geom::Box3D> pred, std::span<const geom::Box3D> truth,
            std::span<const geom::Box3D> anchors, const LossConfig& cfg);

struct AnchorScore {
  int hy = 0, wx = 0;
  int yaw_index = 0;
  double score = 0.0;
  geom::Box3D box;
};

// Per-anchor score: mean cell feature energy (channel L2 / sqrt(C))
// over the anchor footprint, squashed to [0, 1) by the rescaled
// logistic 2/(1+exp(-2*k*e)) - 1. Monotone in every map value, so
// max-fusing maps never lowers any score. Channel-selected maps are
// expanded first.
std::vector<AnchorScore> anchor_scores(const encoder::SpatialFeatureMap& map,
                                       const AnchorGrid& grid);

// Anchors above the threshold, greedily non-max-suppressed at BEV IoU 0.5.
std::vector<Detection> proxy_detect(const encoder::SpatialFeatureMap& map,
                                    const AnchorGrid& grid, double threshold = 0.5);

struct PrecisionReport {
  std::optional<double> near_pct, far_pct;  // empty bucket reports nothing
  int near_tp = 0, near_fp = 0, far_tp = 0, far_fp = 0;
  int truths_near = 0, truths_far = 0;
};

// Greedy one-to-one matching in descending score order; a detection is
// correct at IoU >= iou_thresh. Buckets split at near_cut meters from
// the receiver origin.
PrecisionReport precision(const std::vector<Detection>& dets,
                          const std::vector<geom::Box3D>& truths,
                          double iou_thresh = 0.7, double near_cut = 20.0);

struct SceneConfig {
  voxel::VoxelGridSpec grid = voxel::desk_grid();
  std::vector<geom::Pose> vehicle_poses;  // world frame, first is the receiver
  std::vector<geom::Box3D> boxes;         // world frame
  int beams = 16;
  double elevation_min_deg = -15.0, elevation_max_deg = 15.0;
  double azimuth_step_deg = 0.25;
  double max_range_m = 120.0;
  double reflectance = 0.5;
};

struct Scene {
  SceneConfig config;
  std::vector<voxel::PointCloud> clouds;  // one per vehicle, own sensor frame
};

// Angular ray casting against the box faces; the nearest hit wins, so a
// face behind a closer box yields no points. Deterministic per seed
// (the seed phases the azimuth sweep).
Scene generate_scene(const SceneConfig& cfg, uint64_t seed);

// Two vehicles at right angles, two fully visible boxes plus one target
// that each vehicle sees only partially past its own occluder. Drives
// the fusion-reveals-what-neither-sees-alone checks.
SceneConfig occlusion_scene(uint64_t seed);

// bucket -> sample -> encode, with per-voxel sampling seeds derived from
// (seed, voxel key)
voxel::VoxelFeatureStore encode_cloud(const voxel::VoxelGridSpec& grid,
                                      const voxel::PointCloud& cloud,
                                      const encoder::EncoderWeights& weights,
                                      uint64_t seed);

// target == truth box index; score is the best detection overlapping it
// at BEV IoU >= 0.3, or 0 when missed
struct TargetScore {
  int target = 0;
  double score = 0.0;
  bool detected = false;
};

struct DriftTrial {
  double dx = 0.0, dy = 0.0;
  std::vector<TargetScore> vff, sff;
};

struct DriftReport {
  double drift_m = 0.0;
  std::vector<TargetScore> baseline_vff, baseline_sff;
  std::vector<DriftTrial> trials;
};

// Re-runs both fusion paradigms with the sender pose perturbed by
// drift_m in seeded random directions; clouds and features stay fixed,
// only the reported pose moves.
DriftReport drift_experiment(const SceneConfig& scene, const encoder::EncoderWeights& weights,
                             double drift_m, int trials, uint64_t seed);

}  // namespace fcooper::evalkit
