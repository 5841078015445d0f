#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fcooper/geom.hpp"

namespace fcooper {

// Every per-voxel feature vector has this length.
inline constexpr int kFeatureDim = 128;
using Feature = std::array<float, kFeatureDim>;

}  // namespace fcooper

namespace fcooper::voxel {

struct PointXYZR {
  float x = 0.f, y = 0.f, z = 0.f, r = 0.f;
};
using PointCloud = std::vector<PointXYZR>;

struct VoxelKey {
  int ix = 0, iy = 0, iz = 0;
  bool operator==(const VoxelKey&) const = default;
};

// Detection range and voxel edge sizes. nx/ny/nz are the grid dims
// (nx along x = BEV width, ny along y = BEV height, nz along z = depth
// planes). With the stock constants they come out 352 x 400 x 10.
struct VoxelGridSpec {
  double x_min = 0.0, x_max = 70.4;
  double y_min = -40.0, y_max = 40.0;
  double z_min = -3.0, z_max = 1.0;
  double vx = 0.2, vy = 0.2, vz = 0.4;

  int nx() const;
  int ny() const;
  int nz() const;
  uint64_t cell_count() const;

  // throws std::invalid_argument on a degenerate range or size
  void validate() const;

  // inclusive of the max faces; boundary points land in the last cell
  bool contains(double x, double y, double z) const;

  geom::Point3 center_of(const VoxelKey& k) const;

  uint32_t linear(const VoxelKey& k) const;
  VoxelKey delinear(uint32_t key) const;

  bool same_voxel_size(const VoxelGridSpec& o) const;
  bool operator==(const VoxelGridSpec&) const = default;
};

// Stock detection range: x [0, 70.4], y [-40, 40], z [-3, 1], cells
// 0.2 x 0.2 x 0.4.
VoxelGridSpec default_grid();

// Same cell sizes and depth plan on a small footprint (88 x 100 x 10);
// suited to quick runs and tests.
VoxelGridSpec desk_grid();

// floor((p - min) / cell) per axis; nullopt when the point is outside
// the detection range (such points are simply not used).
std::optional<VoxelKey> voxel_index(const VoxelGridSpec& spec, const PointXYZR& p);
std::optional<VoxelKey> voxel_index(const VoxelGridSpec& spec, const geom::Point3& p);

// buckets keyed by linearized voxel key; out-of-range points dropped
using VoxelBuckets = std::unordered_map<uint32_t, PointCloud>;
VoxelBuckets bucket_points(const VoxelGridSpec& spec, const PointCloud& cloud);

inline constexpr int kSampleCap = 35;

// At most `cap` points, sampled without replacement; inputs at or under
// the cap pass through unchanged. Deterministic for a given seed.
PointCloud sample_voxel(const PointCloud& points, int cap, uint64_t seed);

// Sparse per-voxel features keyed by linearized voxel coordinates.
// Only non-empty voxels have entries.
struct VoxelFeatureStore {
  VoxelGridSpec spec;
  std::unordered_map<uint32_t, Feature> entries;

  std::vector<uint32_t> sorted_keys() const;
};

// Raw little-endian float quadruples (x, y, z, reflectance), no header.
PointCloud read_point_file(const std::string& path);
void write_point_file(const std::string& path, const PointCloud& cloud);

}  // namespace fcooper::voxel
