#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fcooper/geom.hpp"
#include "fcooper/kernels.hpp"
#include "fcooper/voxel.hpp"

namespace fcooper::encoder {

// per-point input: (x, y, z, reflectance, x - cx, y - cy, z - cz) with
// the centroid taken over the voxel's points
inline constexpr int kPointFeatureDim = 7;
inline constexpr int kVfeHiddenDim = 64;

struct Conv3DWeights {
  int out_c = 0, in_c = 0;
  std::vector<float> w;  // [oc][ic][3][3][3]
  std::vector<float> b;  // [oc]

  bool operator==(const Conv3DWeights&) const = default;
};

// Fixed forward-pass weights, fully determined by the seed: every value
// is drawn from a splitmix64 stream as uniform +-sqrt(6/(fan_in+fan_out))
// in declaration order (vfe1 w/b, vfe2 w/b, conv1..3 w/b); biases are
// zero. Identical seeds give bit-identical weights on any platform.
struct EncoderWeights {
  uint64_t seed = 0;
  std::vector<float> vfe1_w, vfe1_b;  // 64x7, 64
  std::vector<float> vfe2_w, vfe2_b;  // 128x128, 128
  std::array<Conv3DWeights, 3> fln;

  static EncoderWeights from_seed(uint64_t seed);

  // flat little-endian float file behind a 16-byte header
  // (magic "FCWT", u32 version, u64 seed)
  void save(const std::string& path) const;
  static EncoderWeights load(const std::string& path);

  bool operator==(const EncoderWeights&) const = default;
};

// Dense channel-major BEV feature tensor. The grid rect lives in the
// origin pose's frame: column wx covers x in [x_min + wx*cell, +cell),
// row hy covers y likewise. channel_ids names the logical channel
// behind each stored plane (a channel-selected map carries fewer than
// kFeatureDim planes).
struct SpatialFeatureMap {
  int channels = 0, height = 0, width = 0;
  std::vector<float> data;  // [c][h][w]
  geom::Pose origin;
  double cell = 0.2;
  double x_min = 0.0, y_min = 0.0;
  std::vector<int> channel_ids;

  size_t plane_cells() const { return static_cast<size_t>(height) * width; }
  float* plane(int c) { return data.data() + c * plane_cells(); }
  const float* plane(int c) const { return data.data() + c * plane_cells(); }
  float& at(int c, int hy, int wx) { return data[c * plane_cells() + static_cast<size_t>(hy) * width + wx]; }
  float at(int c, int hy, int wx) const { return data[c * plane_cells() + static_cast<size_t>(hy) * width + wx]; }
  double x_max() const { return x_min + width * cell; }
  double y_max() const { return y_min + height * cell; }
  int plane_of(int channel_id) const;  // -1 when absent
};

// Depth plan of the three convolutions: D -> ceil(D/2) -> (.-2) ->
// ceil(./2). The final depth must come out 2 so the reshape lands on
// kFeatureDim channels; other depths throw.
struct FlnPlan {
  std::array<int, 4> depths;  // input and after each conv
  std::array<kernels::Conv3DSpec, 3> convs;
  int fused_channels = 0;
};
FlnPlan fln_plan(int depth);

// One feature vector per non-empty voxel: point-wise layer, max over
// points, per-point concat with the aggregate, voxel-level layer, max
// again. Output is non-negative. Throws on an empty point list or one
// beyond the sampling cap.
voxel::VoxelFeatureStore encode_voxels(const voxel::VoxelGridSpec& spec,
                                       const voxel::VoxelBuckets& sampled,
                                       const EncoderWeights& weights);

// Scatter the store into a dense C x D x H x W tensor, run the three
// convolutions, and fold depth into channels (fused channel = c*2 + d).
SpatialFeatureMap spatial_features(const voxel::VoxelFeatureStore& store,
                                   const EncoderWeights& weights,
                                   const geom::Pose& origin = {});

}  // namespace fcooper::encoder
