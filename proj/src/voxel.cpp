#include "fcooper/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fcooper/rng.hpp"

namespace fcooper::voxel {

namespace {

int axis_cells(double lo, double hi, double size) {
  return static_cast<int>(std::lround((hi - lo) / size));
}

int axis_index(double v, double lo, double hi, double size, int cells) {
  if (v < lo || v > hi) return -1;
  int i = static_cast<int>(std::floor((v - lo) / size));
  if (i >= cells) i = cells - 1;  // p == max clamps into the last cell
  if (i < 0) i = 0;
  return i;
}

}  // namespace

int VoxelGridSpec::nx() const { return axis_cells(x_min, x_max, vx); }
int VoxelGridSpec::ny() const { return axis_cells(y_min, y_max, vy); }
int VoxelGridSpec::nz() const { return axis_cells(z_min, z_max, vz); }

uint64_t VoxelGridSpec::cell_count() const {
  return static_cast<uint64_t>(nx()) * static_cast<uint64_t>(ny()) *
         static_cast<uint64_t>(nz());
}

void VoxelGridSpec::validate() const {
  if (!(x_max > x_min && y_max > y_min && z_max > z_min))
    throw std::invalid_argument("voxel grid: max must exceed min per axis");
  if (!(vx > 0.0 && vy > 0.0 && vz > 0.0))
    throw std::invalid_argument("voxel grid: voxel sizes must be positive");
  if (nx() <= 0 || ny() <= 0 || nz() <= 0)
    throw std::invalid_argument("voxel grid: empty dimension");
  if (cell_count() > 0xffffffffull)
    throw std::invalid_argument("voxel grid: cell count exceeds 32-bit keys");
}

bool VoxelGridSpec::contains(double x, double y, double z) const {
  return x >= x_min && x <= x_max && y >= y_min && y <= y_max && z >= z_min &&
         z <= z_max;
}

geom::Point3 VoxelGridSpec::center_of(const VoxelKey& k) const {
  return {x_min + (k.ix + 0.5) * vx, y_min + (k.iy + 0.5) * vy,
          z_min + (k.iz + 0.5) * vz};
}

uint32_t VoxelGridSpec::linear(const VoxelKey& k) const {
  const uint64_t w = nx(), h = ny();
  return static_cast<uint32_t>(k.ix + w * (k.iy + h * k.iz));
}

VoxelKey VoxelGridSpec::delinear(uint32_t key) const {
  const uint32_t w = static_cast<uint32_t>(nx());
  const uint32_t h = static_cast<uint32_t>(ny());
  VoxelKey k;
  k.ix = static_cast<int>(key % w);
  k.iy = static_cast<int>((key / w) % h);
  k.iz = static_cast<int>(key / (w * h));
  return k;
}

bool VoxelGridSpec::same_voxel_size(const VoxelGridSpec& o) const {
  return std::abs(vx - o.vx) < 1e-12 && std::abs(vy - o.vy) < 1e-12 &&
         std::abs(vz - o.vz) < 1e-12;
}

VoxelGridSpec default_grid() { return {}; }

VoxelGridSpec desk_grid() {
  VoxelGridSpec g;
  g.x_min = 0.0;
  g.x_max = 17.6;
  g.y_min = -10.0;
  g.y_max = 10.0;
  return g;
}

std::optional<VoxelKey> voxel_index(const VoxelGridSpec& spec, const PointXYZR& p) {
  return voxel_index(spec, geom::Point3{p.x, p.y, p.z});
}

std::optional<VoxelKey> voxel_index(const VoxelGridSpec& spec, const geom::Point3& p) {
  const int ix = axis_index(p.x, spec.x_min, spec.x_max, spec.vx, spec.nx());
  if (ix < 0) return std::nullopt;
  const int iy = axis_index(p.y, spec.y_min, spec.y_max, spec.vy, spec.ny());
  if (iy < 0) return std::nullopt;
  const int iz = axis_index(p.z, spec.z_min, spec.z_max, spec.vz, spec.nz());
  if (iz < 0) return std::nullopt;
  return VoxelKey{ix, iy, iz};
}

VoxelBuckets bucket_points(const VoxelGridSpec& spec, const PointCloud& cloud) {
  VoxelBuckets buckets;
  for (const PointXYZR& p : cloud) {
    if (auto k = voxel_index(spec, p)) {
      buckets[spec.linear(*k)].push_back(p);
    }
  }
  return buckets;
}

PointCloud sample_voxel(const PointCloud& points, int cap, uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("sample_voxel: cap must be >= 1");
  const size_t n = points.size();
  if (n <= static_cast<size_t>(cap)) return points;

  // partial Fisher-Yates over an index vector
  std::vector<uint32_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);
  SplitMix64 rng(seed);
  PointCloud out;
  out.reserve(cap);
  for (int i = 0; i < cap; ++i) {
    const size_t j = i + static_cast<size_t>(rng.bounded(n - i));
    std::swap(idx[i], idx[j]);
    out.push_back(points[idx[i]]);
  }
  return out;
}

std::vector<uint32_t> VoxelFeatureStore::sorted_keys() const {
  std::vector<uint32_t> keys;
  keys.reserve(entries.size());
  for (const auto& [k, _] : entries) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

PointCloud read_point_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open point file: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes % 16 != 0)
    throw std::runtime_error("point file size not a multiple of 16: " + path);
  PointCloud cloud(static_cast<size_t>(bytes / 16));
  if (!cloud.empty()) {
    in.read(reinterpret_cast<char*>(cloud.data()), bytes);
    if (!in) throw std::runtime_error("short read on point file: " + path);
  }
  return cloud;
}

void write_point_file(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write point file: " + path);
  out.write(reinterpret_cast<const char*>(cloud.data()),
            static_cast<std::streamsize>(cloud.size() * 16));
  if (!out) throw std::runtime_error("short write on point file: " + path);
}

}  // namespace fcooper::voxel
