#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "fcooper/encoder.hpp"
#include "fcooper/fusion.hpp"
#include "fcooper/geom.hpp"
#include "fcooper/voxel.hpp"

namespace fcooper::wire {

// Envelope layout (all integers and floats little-endian):
//   0   magic "FCPR"
//   4   version u8
//   5   kind u8 (1 voxel features, 2 spatial features, 3 detections)
//   6   sender pose, 4 x f64 (x, y, z, yaw)
//   38  grid ranges, 6 x f64 (x_min, x_max, y_min, y_max, z_min, z_max)
//   86  voxel sizes, 3 x f64
//   110 channel mask, 16 bytes
//   126 entry count u32
//   130 compressed body length u32, then the gzip stream
//
// Bodies (uncompressed):
//   voxel:      u32 count, u32 feature dim, u32 reserved, then entries of
//               (u32 linearized key, 128 x f32) with keys strictly ascending
//   spatial:    u32 height, u32 width, then per plane
//               (u32 channel id, u32 plane bytes, H*W x f32)
//   detections: u32 count, u32 reserved, then (7 x f32 box, f32 score)

enum class MessageKind : uint8_t { VoxelFeatures = 1, SpatialFeatures = 2, Detections = 3 };

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kEnvelopeBytes = 130;
inline constexpr size_t kVoxelBodyHeaderBytes = 12;
inline constexpr size_t kVoxelEntryBytes = 4 + kFeatureDim * 4;  // 516
inline constexpr size_t kSpatialBodyHeaderBytes = 8;
inline constexpr size_t kSpatialPlaneHeaderBytes = 8;
inline constexpr size_t kDetectionBodyHeaderBytes = 8;
inline constexpr size_t kDetectionRecordBytes = 32;
inline constexpr size_t kRawPointBytes = 16;

struct VoxelPayload {
  std::vector<std::pair<uint32_t, Feature>> entries;  // ascending keys
  bool operator==(const VoxelPayload&) const = default;
};

struct SpatialPayload {
  uint32_t height = 0, width = 0;
  std::vector<std::pair<uint32_t, std::vector<float>>> planes;
  bool operator==(const SpatialPayload&) const = default;
};

struct DetectionRecord {
  std::array<float, 7> box{};  // cx, cy, cz, l, w, h, yaw
  float score = 0.f;
  bool operator==(const DetectionRecord&) const = default;
};

struct DetectionPayload {
  std::vector<DetectionRecord> records;
  bool operator==(const DetectionPayload&) const = default;
};

struct FeatureMessage {
  MessageKind kind = MessageKind::VoxelFeatures;
  geom::Pose sender_pose;
  voxel::VoxelGridSpec grid;
  fusion::ChannelMask mask;
  std::variant<VoxelPayload, SpatialPayload, DetectionPayload> payload;

  uint32_t entry_count() const;
  bool operator==(const FeatureMessage&) const = default;
};

FeatureMessage make_voxel_message(const voxel::VoxelFeatureStore& store,
                                  const geom::Pose& sender_pose);
FeatureMessage make_spatial_message(const encoder::SpatialFeatureMap& map,
                                    const fusion::ChannelMask& mask,
                                    const geom::Pose& sender_pose);
FeatureMessage make_detection_message(const std::vector<DetectionRecord>& records,
                                      const voxel::VoxelGridSpec& grid,
                                      const geom::Pose& sender_pose);

// kind-specific body bytes (uncompressed)
std::vector<uint8_t> pack_voxel(const voxel::VoxelFeatureStore& store);
voxel::VoxelFeatureStore unpack_voxel(std::span<const uint8_t> body,
                                      const voxel::VoxelGridSpec& grid);
std::vector<uint8_t> pack_spatial(const encoder::SpatialFeatureMap& map,
                                  const fusion::ChannelMask& mask);
encoder::SpatialFeatureMap unpack_spatial(std::span<const uint8_t> body,
                                          const voxel::VoxelGridSpec& grid,
                                          const geom::Pose& sender_pose);
std::vector<uint8_t> pack_body(const FeatureMessage& msg);

// gzip container (DEFLATE with header + CRC); decompress throws
// std::runtime_error on a corrupted or truncated stream
std::vector<uint8_t> compress(std::span<const uint8_t> body);
std::vector<uint8_t> decompress(std::span<const uint8_t> wire_bytes);

std::vector<uint8_t> encode_message(const FeatureMessage& msg);
FeatureMessage decode_message(std::span<const uint8_t> bytes);

// reconstruct module objects from a decoded message
voxel::VoxelFeatureStore store_from_message(const FeatureMessage& msg);
encoder::SpatialFeatureMap map_from_message(const FeatureMessage& msg);

struct SizeReport {
  uint64_t logical_bytes = 0;  // envelope + uncompressed body
  uint64_t wire_bytes = 0;     // envelope + compressed body
  double ratio = 1.0;          // wire / logical
  uint64_t raw_reference_bytes = 0;  // in-range points x 16
};

uint64_t body_logical_size(const FeatureMessage& msg);
SizeReport size_report(const FeatureMessage& msg, uint64_t in_range_points = 0);

}  // namespace fcooper::wire
