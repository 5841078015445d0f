#include "fcooper/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fcooper/kernels.hpp"

namespace fcooper::fusion {

ChannelMask ChannelMask::range(int lo, int hi) {
  if (lo < 0 || hi >= kFeatureDim || lo > hi)
    throw std::invalid_argument("channel mask: bad range");
  ChannelMask m;
  for (int c = lo; c <= hi; ++c) m.bits.set(static_cast<size_t>(c));
  return m;
}

ChannelMask ChannelMask::parse(const std::string& text) {
  if (text == "full") return full();
  if (text == "key") return key_channels();
  if (text == "min") return min_channels();
  const auto dash = text.find('-');
  if (dash == std::string::npos)
    throw std::invalid_argument("channel mask: expected full|key|min|LO-HI, got '" + text + "'");
  try {
    const int lo = std::stoi(text.substr(0, dash));
    const int hi = std::stoi(text.substr(dash + 1));
    return range(lo, hi);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("channel mask: cannot parse '" + text + "'");
  }
}

std::vector<int> ChannelMask::channels() const {
  std::vector<int> out;
  out.reserve(bits.count());
  for (int c = 0; c < kFeatureDim; ++c)
    if (bits.test(static_cast<size_t>(c))) out.push_back(c);
  return out;
}

std::array<uint8_t, 16> ChannelMask::to_bytes() const {
  std::array<uint8_t, 16> out{};
  for (int c = 0; c < kFeatureDim; ++c)
    if (bits.test(static_cast<size_t>(c))) out[c / 8] |= static_cast<uint8_t>(1u << (c % 8));
  return out;
}

ChannelMask ChannelMask::from_bytes(const std::array<uint8_t, 16>& bytes) {
  ChannelMask m;
  for (int c = 0; c < kFeatureDim; ++c)
    if (bytes[c / 8] & (1u << (c % 8))) m.bits.set(static_cast<size_t>(c));
  return m;
}

const char* alignment_name(AlignmentKind k) {
  switch (k) {
    case AlignmentKind::Interior: return "interior";
    case AlignmentKind::Face: return "face";
    case AlignmentKind::Edge: return "edge";
    case AlignmentKind::Corner: return "corner";
  }
  return "?";
}

namespace {

struct AxisCells {
  int cells[2];
  int n = 1;
  bool on_plane = false;
};

AxisCells classify_axis(double v, double lo, double size, int dim, double eps) {
  AxisCells out;
  const double u = (v - lo) / size;
  const long long k = std::llround(u);
  const double plane = lo + static_cast<double>(k) * size;
  if (std::abs(v - plane) <= eps && k >= 0 && k <= dim) {
    out.on_plane = true;
    out.n = 0;
    if (k - 1 >= 0) out.cells[out.n++] = static_cast<int>(k - 1);
    if (k <= dim - 1) out.cells[out.n++] = static_cast<int>(k);
  } else {
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, dim - 1);
    out.cells[0] = i;
  }
  return out;
}

}  // namespace

AlignmentCase classify_alignment(const geom::Point3& center,
                                 const voxel::VoxelGridSpec& spec, double eps) {
  const AxisCells ax = classify_axis(center.x, spec.x_min, spec.vx, spec.nx(), eps);
  const AxisCells ay = classify_axis(center.y, spec.y_min, spec.vy, spec.ny(), eps);
  const AxisCells az = classify_axis(center.z, spec.z_min, spec.vz, spec.nz(), eps);

  AlignmentCase out;
  const int planes = static_cast<int>(ax.on_plane) + static_cast<int>(ay.on_plane) +
                     static_cast<int>(az.on_plane);
  out.kind = static_cast<AlignmentKind>(planes);
  out.keys.reserve(static_cast<size_t>(ax.n) * ay.n * az.n);
  for (int a = 0; a < ax.n; ++a)
    for (int b = 0; b < ay.n; ++b)
      for (int c = 0; c < az.n; ++c)
        out.keys.push_back({ax.cells[a], ay.cells[b], az.cells[c]});
  return out;
}

std::vector<float> maxout_fuse(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("maxout_fuse: length mismatch");
  std::vector<float> out(a.size());
  kernels::ref::maxout(a, b, out);
  return out;
}

Feature maxout_fuse(const Feature& a, const Feature& b) {
  Feature out;
  for (int i = 0; i < kFeatureDim; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
  return out;
}

voxel::VoxelFeatureStore vff(const voxel::VoxelFeatureStore& receiver,
                             const voxel::VoxelFeatureStore& sender,
                             const geom::RigidTransform2p5D& t, double eps) {
  if (!receiver.spec.same_voxel_size(sender.spec))
    throw std::invalid_argument("vff: voxel size mismatch");

  voxel::VoxelFeatureStore out = receiver;
  for (uint32_t key : sender.sorted_keys()) {
    const geom::Point3 center =
        geom::apply_transform(t, sender.spec.center_of(sender.spec.delinear(key)));
    if (!receiver.spec.contains(center.x, center.y, center.z)) continue;
    const Feature& feat = sender.entries.at(key);
    const AlignmentCase ac = classify_alignment(center, receiver.spec, eps);
    for (const voxel::VoxelKey& k : ac.keys) {
      const uint32_t lk = receiver.spec.linear(k);
      auto [it, inserted] = out.entries.try_emplace(lk, feat);
      if (!inserted) it->second = maxout_fuse(it->second, feat);
    }
  }
  return out;
}

namespace {

double snap_down(double v, double anchor, double cell) {
  return anchor + std::floor((v - anchor) / cell + 1e-9) * cell;
}

double snap_up(double v, double anchor, double cell) {
  return anchor + std::ceil((v - anchor) / cell - 1e-9) * cell;
}

}  // namespace

encoder::SpatialFeatureMap sff(const encoder::SpatialFeatureMap& receiver,
                               const encoder::SpatialFeatureMap& sender,
                               const geom::Pose& receiver_pose,
                               const geom::Pose& sender_pose,
                               const ChannelMask& mask) {
  if (std::abs(receiver.cell - sender.cell) > 1e-9)
    throw std::invalid_argument("sff: cell size mismatch");
  const double cell = receiver.cell;

  geom::RigidTransform2p5D t = geom::relative_transform(receiver_pose, sender_pose);
  if (std::abs(t.rotation) <= kHeadingAlignTol) t.rotation = 0.0;

  // sender footprint bounding box in the receiver frame
  const double sx[4] = {sender.x_min, sender.x_max(), sender.x_max(), sender.x_min};
  const double sy[4] = {sender.y_min, sender.y_min, sender.y_max(), sender.y_max()};
  double bx0 = 1e300, bx1 = -1e300, by0 = 1e300, by1 = -1e300;
  for (int i = 0; i < 4; ++i) {
    const geom::Point3 p = geom::apply_transform(t, {sx[i], sy[i], 0.0});
    bx0 = std::min(bx0, p.x);
    bx1 = std::max(bx1, p.x);
    by0 = std::min(by0, p.y);
    by1 = std::max(by1, p.y);
  }

  // canvas on the receiver lattice
  const double cx0 = snap_down(std::min(bx0, receiver.x_min), receiver.x_min, cell);
  const double cx1 = snap_up(std::max(bx1, receiver.x_max()), receiver.x_min, cell);
  const double cy0 = snap_down(std::min(by0, receiver.y_min), receiver.y_min, cell);
  const double cy1 = snap_up(std::max(by1, receiver.y_max()), receiver.y_min, cell);
  const int W = static_cast<int>(std::lround((cx1 - cx0) / cell));
  const int H = static_cast<int>(std::lround((cy1 - cy0) / cell));

  encoder::SpatialFeatureMap out;
  out.channels = receiver.channels;
  out.height = H;
  out.width = W;
  out.data.assign(static_cast<size_t>(out.channels) * H * W, 0.f);
  out.origin = receiver_pose;
  out.cell = cell;
  out.x_min = cx0;
  out.y_min = cy0;
  out.channel_ids = receiver.channel_ids;

  // receiver copies in on lattice-aligned offsets
  const int offx = static_cast<int>(std::lround((receiver.x_min - cx0) / cell));
  const int offy = static_cast<int>(std::lround((receiver.y_min - cy0) / cell));
  for (int c = 0; c < receiver.channels; ++c) {
    for (int hy = 0; hy < receiver.height; ++hy) {
      std::copy_n(receiver.plane(c) + static_cast<size_t>(hy) * receiver.width,
                  receiver.width,
                  out.plane(c) + static_cast<size_t>(hy + offy) * W + offx);
    }
  }

  // per-canvas-cell source index in the sender map (-1 outside)
  const geom::RigidTransform2p5D inv = geom::inverse(t);
  std::vector<int64_t> src(static_cast<size_t>(H) * W, -1);
#pragma omp parallel for schedule(static)
  for (int hy = 0; hy < H; ++hy) {
    const double y = cy0 + (hy + 0.5) * cell;
    for (int wx = 0; wx < W; ++wx) {
      const double x = cx0 + (wx + 0.5) * cell;
      const geom::Point3 p = geom::apply_transform(inv, {x, y, 0.0});
      if (p.x < sender.x_min || p.x >= sender.x_max() || p.y < sender.y_min ||
          p.y >= sender.y_max())
        continue;
      const int si = std::clamp(
          static_cast<int>(std::floor((p.x - sender.x_min) / cell)), 0, sender.width - 1);
      const int sj = std::clamp(
          static_cast<int>(std::floor((p.y - sender.y_min) / cell)), 0, sender.height - 1);
      src[static_cast<size_t>(hy) * W + wx] = static_cast<int64_t>(sj) * sender.width + si;
    }
  }

  const int nc = out.channels;
#pragma omp parallel for schedule(dynamic, 4)
  for (int c = 0; c < nc; ++c) {
    const int id = out.channel_ids[c];
    if (!mask.test(id)) continue;
    const int sp = sender.plane_of(id);
    if (sp < 0) continue;
    const float* splane = sender.plane(sp);
    float* oplane = out.plane(c);
    for (size_t i = 0; i < src.size(); ++i) {
      if (src[i] < 0) continue;
      const float v = splane[src[i]];
      if (v > oplane[i]) oplane[i] = v;
    }
  }
  return out;
}

encoder::SpatialFeatureMap select_channels(const encoder::SpatialFeatureMap& map,
                                           const ChannelMask& mask) {
  if (mask.empty()) throw std::invalid_argument("select_channels: empty mask");
  std::vector<int> keep;
  for (int c = 0; c < map.channels; ++c)
    if (mask.test(map.channel_ids[c])) keep.push_back(c);
  if (keep.empty())
    throw std::invalid_argument("select_channels: mask selects no present channel");

  encoder::SpatialFeatureMap out;
  out.channels = static_cast<int>(keep.size());
  out.height = map.height;
  out.width = map.width;
  out.data.resize(static_cast<size_t>(out.channels) * map.plane_cells());
  out.origin = map.origin;
  out.cell = map.cell;
  out.x_min = map.x_min;
  out.y_min = map.y_min;
  out.channel_ids.reserve(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    out.channel_ids.push_back(map.channel_ids[keep[i]]);
    std::copy_n(map.plane(keep[i]), map.plane_cells(), out.plane(static_cast<int>(i)));
  }
  return out;
}

encoder::SpatialFeatureMap expand_channels(const encoder::SpatialFeatureMap& map) {
  encoder::SpatialFeatureMap out;
  out.channels = kFeatureDim;
  out.height = map.height;
  out.width = map.width;
  out.data.assign(static_cast<size_t>(kFeatureDim) * map.plane_cells(), 0.f);
  out.origin = map.origin;
  out.cell = map.cell;
  out.x_min = map.x_min;
  out.y_min = map.y_min;
  out.channel_ids.resize(kFeatureDim);
  for (int c = 0; c < kFeatureDim; ++c) out.channel_ids[c] = c;
  for (int c = 0; c < map.channels; ++c) {
    const int id = map.channel_ids[c];
    if (id >= 0 && id < kFeatureDim)
      std::copy_n(map.plane(c), map.plane_cells(), out.plane(id));
  }
  return out;
}

}  // namespace fcooper::fusion
