#include "fcooper/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fcooper/rng.hpp"

namespace fcooper::encoder {

namespace {

void draw_layer(SplitMix64& rng, std::vector<float>& w, std::vector<float>& b,
                int fan_out, int fan_in) {
  const float scale = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  w.resize(static_cast<size_t>(fan_out) * fan_in);
  for (float& v : w) v = (2.f * rng.next_unit_f() - 1.f) * scale;
  b.assign(fan_out, 0.f);
}

void draw_conv(SplitMix64& rng, Conv3DWeights& cw, int out_c, int in_c) {
  cw.out_c = out_c;
  cw.in_c = in_c;
  const int fan_in = in_c * 27;
  const int fan_out = out_c * 27;
  const float scale = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  cw.w.resize(static_cast<size_t>(out_c) * in_c * 27);
  for (float& v : cw.w) v = (2.f * rng.next_unit_f() - 1.f) * scale;
  cw.b.assign(out_c, 0.f);
}

constexpr char kWeightMagic[4] = {'F', 'C', 'W', 'T'};
constexpr uint32_t kWeightVersion = 1;

void put_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * 4));
}

void get_floats(std::ifstream& in, std::vector<float>& v, size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
}

}  // namespace

EncoderWeights EncoderWeights::from_seed(uint64_t seed) {
  EncoderWeights w;
  w.seed = seed;
  SplitMix64 rng(seed);
  draw_layer(rng, w.vfe1_w, w.vfe1_b, kVfeHiddenDim, kPointFeatureDim);
  draw_layer(rng, w.vfe2_w, w.vfe2_b, kFeatureDim, kFeatureDim);
  draw_conv(rng, w.fln[0], 64, kFeatureDim);
  draw_conv(rng, w.fln[1], 64, 64);
  draw_conv(rng, w.fln[2], 64, 64);
  return w;
}

void EncoderWeights::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write weight file: " + path);
  out.write(kWeightMagic, 4);
  out.write(reinterpret_cast<const char*>(&kWeightVersion), 4);
  out.write(reinterpret_cast<const char*>(&seed), 8);
  put_floats(out, vfe1_w);
  put_floats(out, vfe1_b);
  put_floats(out, vfe2_w);
  put_floats(out, vfe2_b);
  for (const auto& c : fln) {
    put_floats(out, c.w);
    put_floats(out, c.b);
  }
  if (!out) throw std::runtime_error("short write on weight file: " + path);
}

EncoderWeights EncoderWeights::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);
  char magic[4];
  uint32_t version = 0;
  EncoderWeights w;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&w.seed), 8);
  if (!in || std::memcmp(magic, kWeightMagic, 4) != 0)
    throw std::runtime_error("bad weight file magic: " + path);
  if (version != kWeightVersion)
    throw std::runtime_error("unsupported weight file version: " + path);
  get_floats(in, w.vfe1_w, static_cast<size_t>(kVfeHiddenDim) * kPointFeatureDim);
  get_floats(in, w.vfe1_b, kVfeHiddenDim);
  get_floats(in, w.vfe2_w, static_cast<size_t>(kFeatureDim) * kFeatureDim);
  get_floats(in, w.vfe2_b, kFeatureDim);
  const int dims[3][2] = {{64, kFeatureDim}, {64, 64}, {64, 64}};
  for (int i = 0; i < 3; ++i) {
    w.fln[i].out_c = dims[i][0];
    w.fln[i].in_c = dims[i][1];
    get_floats(in, w.fln[i].w, static_cast<size_t>(dims[i][0]) * dims[i][1] * 27);
    get_floats(in, w.fln[i].b, dims[i][0]);
  }
  if (!in) throw std::runtime_error("truncated weight file: " + path);
  return w;
}

int SpatialFeatureMap::plane_of(int channel_id) const {
  for (int i = 0; i < channels; ++i)
    if (channel_ids[i] == channel_id) return i;
  return -1;
}

FlnPlan fln_plan(int depth) {
  FlnPlan p;
  p.depths[0] = depth;
  p.convs[0] = {kFeatureDim, 64, 2, 1, true};
  p.convs[1] = {64, 64, 1, 0, true};
  p.convs[2] = {64, 64, 2, 1, true};
  for (int i = 0; i < 3; ++i) {
    const int in_d = p.depths[i];
    if (in_d + 2 * p.convs[i].pad_d < 3)
      throw std::invalid_argument("fln_plan: depth too small for conv stack");
    p.depths[i + 1] = p.convs[i].out_depth(in_d);
  }
  p.fused_channels = 64 * p.depths[3];
  if (p.fused_channels != kFeatureDim)
    throw std::invalid_argument(
        "fln_plan: depth incompatible, final depth must be 2 (got " +
        std::to_string(p.depths[3]) + ")");
  return p;
}

namespace {

Feature vfe_forward(const voxel::PointCloud& pts, const EncoderWeights& w) {
  const int n = static_cast<int>(pts.size());
  double cx = 0, cy = 0, cz = 0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
    cz += p.z;
  }
  cx /= n;
  cy /= n;
  cz /= n;

  // point-wise layer, then the voxel aggregate
  std::vector<std::array<float, kVfeHiddenDim>> hidden(n);
  std::array<float, kVfeHiddenDim> agg;
  agg.fill(0.f);  // inputs are relu outputs, so 0 is the identity for max
  for (int i = 0; i < n; ++i) {
    const auto& p = pts[i];
    const float f[kPointFeatureDim] = {
        p.x, p.y, p.z, p.r,
        static_cast<float>(p.x - cx), static_cast<float>(p.y - cy),
        static_cast<float>(p.z - cz)};
    for (int o = 0; o < kVfeHiddenDim; ++o) {
      float acc = w.vfe1_b[o];
      const float* row = &w.vfe1_w[static_cast<size_t>(o) * kPointFeatureDim];
      for (int j = 0; j < kPointFeatureDim; ++j) acc += row[j] * f[j];
      const float v = acc > 0.f ? acc : 0.f;
      hidden[i][o] = v;
      if (v > agg[o]) agg[o] = v;
    }
  }

  // voxel-level layer on [per-point, aggregate], max over points
  Feature out;
  out.fill(0.f);
  for (int i = 0; i < n; ++i) {
    float cat[kFeatureDim];
    std::memcpy(cat, hidden[i].data(), kVfeHiddenDim * 4);
    std::memcpy(cat + kVfeHiddenDim, agg.data(), kVfeHiddenDim * 4);
    for (int o = 0; o < kFeatureDim; ++o) {
      float acc = w.vfe2_b[o];
      const float* row = &w.vfe2_w[static_cast<size_t>(o) * kFeatureDim];
      for (int j = 0; j < kFeatureDim; ++j) acc += row[j] * cat[j];
      const float v = acc > 0.f ? acc : 0.f;
      if (v > out[o]) out[o] = v;
    }
  }
  return out;
}

}  // namespace

voxel::VoxelFeatureStore encode_voxels(const voxel::VoxelGridSpec& spec,
                                       const voxel::VoxelBuckets& sampled,
                                       const EncoderWeights& weights) {
  spec.validate();
  std::vector<uint32_t> keys;
  keys.reserve(sampled.size());
  for (const auto& [k, pts] : sampled) {
    if (pts.empty())
      throw std::invalid_argument("encode_voxels: empty voxel in input");
    if (pts.size() > static_cast<size_t>(voxel::kSampleCap))
      throw std::invalid_argument("encode_voxels: voxel exceeds sampling cap");
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());

  std::vector<Feature> feats(keys.size());
  const int64_t n = static_cast<int64_t>(keys.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (int64_t i = 0; i < n; ++i) {
    feats[i] = vfe_forward(sampled.at(keys[i]), weights);
  }

  voxel::VoxelFeatureStore store;
  store.spec = spec;
  store.entries.reserve(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) store.entries.emplace(keys[i], feats[i]);
  return store;
}

SpatialFeatureMap spatial_features(const voxel::VoxelFeatureStore& store,
                                   const EncoderWeights& weights,
                                   const geom::Pose& origin) {
  const voxel::VoxelGridSpec& spec = store.spec;
  spec.validate();
  if (std::abs(spec.vx - spec.vy) > 1e-12)
    throw std::invalid_argument("spatial_features: BEV cells must be square");
  const FlnPlan plan = fln_plan(spec.nz());

  const int D = spec.nz(), H = spec.ny(), W = spec.nx();
  kernels::Tensor4 x(kFeatureDim, D, H, W);
  for (const auto& [key, feat] : store.entries) {
    const voxel::VoxelKey k = spec.delinear(key);
    for (int c = 0; c < kFeatureDim; ++c) x.at(c, k.iz, k.iy, k.ix) = feat[c];
  }

  kernels::Tensor4 y;
  for (int i = 0; i < 3; ++i) {
    kernels::conv3d(x, weights.fln[i].w, weights.fln[i].b, plan.convs[i], y);
    x = std::move(y);
  }

  SpatialFeatureMap map;
  map.channels = plan.fused_channels;
  map.height = H;
  map.width = W;
  map.data.resize(static_cast<size_t>(map.channels) * H * W);
  map.origin = origin;
  map.cell = spec.vx;
  map.x_min = spec.x_min;
  map.y_min = spec.y_min;
  map.channel_ids.resize(map.channels);
  const int fd = plan.depths[3];
  for (int c = 0; c < 64; ++c) {
    for (int dd = 0; dd < fd; ++dd) {
      const int q = c * fd + dd;
      map.channel_ids[q] = q;
      std::memcpy(map.plane(q), &x.data[x.idx(c, dd, 0, 0)], map.plane_cells() * 4);
    }
  }
  return map;
}

}  // namespace fcooper::encoder
