#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <string>
#include <vector>

#include "fcooper/encoder.hpp"
#include "fcooper/geom.hpp"
#include "fcooper/voxel.hpp"

namespace fcooper::fusion {

// Which of the 128 feature channels travel and fuse.
struct ChannelMask {
  std::bitset<kFeatureDim> bits;

  static ChannelMask full() { return range(0, kFeatureDim - 1); }
  static ChannelMask key_channels() { return range(55, 99); }
  static ChannelMask min_channels() { return range(95, 99); }
  static ChannelMask range(int lo, int hi);
  // "full" | "key" | "min" | "LO-HI"
  static ChannelMask parse(const std::string& text);

  int count() const { return static_cast<int>(bits.count()); }
  bool empty() const { return bits.none(); }
  bool test(int c) const { return bits.test(static_cast<size_t>(c)); }
  std::vector<int> channels() const;  // ascending

  // byte i carries channels 8i..8i+7, LSB first
  std::array<uint8_t, 16> to_bytes() const;
  static ChannelMask from_bytes(const std::array<uint8_t, 16>& bytes);

  bool operator==(const ChannelMask&) const = default;
};

enum class AlignmentKind { Interior, Face, Edge, Corner };

// A transformed voxel center against the receiver lattice: the number
// of grid planes it sits on (within eps) decides how many receiver
// voxels it connects with -- 1, 2, 4 or 8.
struct AlignmentCase {
  AlignmentKind kind = AlignmentKind::Interior;
  std::vector<voxel::VoxelKey> keys;  // in-range cells only
};

inline constexpr double kAlignmentEps = 1e-6;

const char* alignment_name(AlignmentKind k);

AlignmentCase classify_alignment(const geom::Point3& center_in_receiver,
                                 const voxel::VoxelGridSpec& spec,
                                 double eps = kAlignmentEps);

// element-wise max; throws on length mismatch
std::vector<float> maxout_fuse(const std::vector<float>& a, const std::vector<float>& b);
Feature maxout_fuse(const Feature& a, const Feature& b);

// Voxel feature fusion: each sender voxel center is mapped into the
// receiver frame, dropped when outside the receiver range, classified,
// and max-fused into every connected receiver voxel (inserting where
// the receiver had none). Sender entries are visited in ascending key
// order so the result is reproducible bit-for-bit.
voxel::VoxelFeatureStore vff(const voxel::VoxelFeatureStore& receiver,
                             const voxel::VoxelFeatureStore& sender,
                             const geom::RigidTransform2p5D& sender_to_receiver,
                             double eps = kAlignmentEps);

// Headings within this tolerance are treated as aligned; beyond it the
// sender map is resampled (nearest neighbor) into the receiver heading.
inline constexpr double kHeadingAlignTol = geom::kPi / 180.0;

// Spatial feature fusion on an enlarged canvas: the output covers the
// bounding rectangle of both footprints on the receiver's cell lattice,
// each map occupies its region, and overlapped cells fuse channel-wise
// under the mask (unmasked sender channels are ignored).
encoder::SpatialFeatureMap sff(const encoder::SpatialFeatureMap& receiver,
                               const encoder::SpatialFeatureMap& sender,
                               const geom::Pose& receiver_pose,
                               const geom::Pose& sender_pose,
                               const ChannelMask& mask);

// Keep only masked channels (order preserving); channel ids are kept so
// the receiver can re-expand. Throws when nothing would remain.
encoder::SpatialFeatureMap select_channels(const encoder::SpatialFeatureMap& map,
                                           const ChannelMask& mask);

// Re-expand a channel-selected map to all kFeatureDim planes, missing
// channels zero.
encoder::SpatialFeatureMap expand_channels(const encoder::SpatialFeatureMap& map);

}  // namespace fcooper::fusion
