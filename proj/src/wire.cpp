#include "fcooper/wire.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <zlib.h>

namespace fcooper::wire {

namespace {

class Writer {
 public:
  explicit Writer(std::vector<uint8_t>& out) : out_(out) {}

  void bytes(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(uint8_t v) { out_.push_back(v); }
  void u32(uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f64(double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    u32(static_cast<uint32_t>(u));
    u32(static_cast<uint32_t>(u >> 32));
  }

 private:
  std::vector<uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  void bytes(void* p, size_t n) {
    if (pos_ + n > data_.size()) throw std::runtime_error("wire: truncated data");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
  }
  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  float f32() {
    const uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    const uint64_t lo = u32();
    const uint64_t hi = u32();
    const uint64_t u = lo | (hi << 32);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  size_t remaining() const { return data_.size() - pos_; }
  std::span<const uint8_t> rest() const { return data_.subspan(pos_); }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

constexpr char kMagic[4] = {'F', 'C', 'P', 'R'};

}  // namespace

uint32_t FeatureMessage::entry_count() const {
  if (const auto* v = std::get_if<VoxelPayload>(&payload))
    return static_cast<uint32_t>(v->entries.size());
  if (const auto* s = std::get_if<SpatialPayload>(&payload))
    return static_cast<uint32_t>(s->planes.size());
  return static_cast<uint32_t>(std::get<DetectionPayload>(payload).records.size());
}

FeatureMessage make_voxel_message(const voxel::VoxelFeatureStore& store,
                                  const geom::Pose& sender_pose) {
  FeatureMessage msg;
  msg.kind = MessageKind::VoxelFeatures;
  msg.sender_pose = sender_pose;
  msg.grid = store.spec;
  msg.mask = fusion::ChannelMask::full();
  VoxelPayload p;
  for (uint32_t k : store.sorted_keys()) p.entries.emplace_back(k, store.entries.at(k));
  msg.payload = std::move(p);
  return msg;
}

FeatureMessage make_spatial_message(const encoder::SpatialFeatureMap& map,
                                    const fusion::ChannelMask& mask,
                                    const geom::Pose& sender_pose) {
  if (mask.empty()) throw std::invalid_argument("wire: empty channel mask");
  FeatureMessage msg;
  msg.kind = MessageKind::SpatialFeatures;
  msg.sender_pose = sender_pose;
  msg.grid.x_min = map.x_min;
  msg.grid.x_max = map.x_max();
  msg.grid.y_min = map.y_min;
  msg.grid.y_max = map.y_max();
  msg.grid.z_min = 0.0;
  msg.grid.z_max = map.cell;  // one nominal plane; BEV maps carry no depth
  msg.grid.vx = msg.grid.vy = msg.grid.vz = map.cell;
  msg.mask = mask;
  SpatialPayload p;
  p.height = static_cast<uint32_t>(map.height);
  p.width = static_cast<uint32_t>(map.width);
  for (int c = 0; c < map.channels; ++c) {
    if (!mask.test(map.channel_ids[c])) continue;
    p.planes.emplace_back(static_cast<uint32_t>(map.channel_ids[c]),
                          std::vector<float>(map.plane(c), map.plane(c) + map.plane_cells()));
  }
  if (p.planes.empty())
    throw std::invalid_argument("wire: mask selects no present channel");
  msg.payload = std::move(p);
  return msg;
}

FeatureMessage make_detection_message(const std::vector<DetectionRecord>& records,
                                      const voxel::VoxelGridSpec& grid,
                                      const geom::Pose& sender_pose) {
  FeatureMessage msg;
  msg.kind = MessageKind::Detections;
  msg.sender_pose = sender_pose;
  msg.grid = grid;
  msg.mask = fusion::ChannelMask::full();
  msg.payload = DetectionPayload{records};
  return msg;
}

std::vector<uint8_t> pack_voxel(const voxel::VoxelFeatureStore& store) {
  std::vector<uint8_t> out;
  const auto keys = store.sorted_keys();
  out.reserve(kVoxelBodyHeaderBytes + keys.size() * kVoxelEntryBytes);
  Writer w(out);
  w.u32(static_cast<uint32_t>(keys.size()));
  w.u32(static_cast<uint32_t>(kFeatureDim));
  w.u32(0);
  for (uint32_t k : keys) {
    w.u32(k);
    const Feature& f = store.entries.at(k);
    w.bytes(f.data(), kFeatureDim * 4);
  }
  return out;
}

voxel::VoxelFeatureStore unpack_voxel(std::span<const uint8_t> body,
                                      const voxel::VoxelGridSpec& grid) {
  Reader r(body);
  const uint32_t count = r.u32();
  const uint32_t dim = r.u32();
  r.u32();
  if (dim != static_cast<uint32_t>(kFeatureDim))
    throw std::runtime_error("wire: unexpected feature dimension");
  voxel::VoxelFeatureStore store;
  store.spec = grid;
  store.entries.reserve(count);
  const uint64_t cells = grid.cell_count();
  uint32_t prev = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t key = r.u32();
    if (i > 0 && key <= prev)
      throw std::runtime_error("wire: voxel keys not strictly ascending");
    if (key >= cells) throw std::runtime_error("wire: voxel key out of range");
    prev = key;
    Feature f;
    r.bytes(f.data(), kFeatureDim * 4);
    store.entries.emplace(key, f);
  }
  if (r.remaining() != 0) throw std::runtime_error("wire: trailing voxel body bytes");
  return store;
}

std::vector<uint8_t> pack_spatial(const encoder::SpatialFeatureMap& map,
                                  const fusion::ChannelMask& mask) {
  if (mask.empty()) throw std::invalid_argument("wire: empty channel mask");
  std::vector<uint8_t> out;
  Writer w(out);
  w.u32(static_cast<uint32_t>(map.height));
  w.u32(static_cast<uint32_t>(map.width));
  const uint32_t plane_bytes = static_cast<uint32_t>(map.plane_cells() * 4);
  for (int c = 0; c < map.channels; ++c) {
    if (!mask.test(map.channel_ids[c])) continue;
    w.u32(static_cast<uint32_t>(map.channel_ids[c]));
    w.u32(plane_bytes);
    w.bytes(map.plane(c), plane_bytes);
  }
  if (out.size() == kSpatialBodyHeaderBytes)
    throw std::invalid_argument("wire: mask selects no present channel");
  return out;
}

encoder::SpatialFeatureMap unpack_spatial(std::span<const uint8_t> body,
                                          const voxel::VoxelGridSpec& grid,
                                          const geom::Pose& sender_pose) {
  Reader r(body);
  encoder::SpatialFeatureMap map;
  map.height = static_cast<int>(r.u32());
  map.width = static_cast<int>(r.u32());
  map.origin = sender_pose;
  map.cell = grid.vx;
  map.x_min = grid.x_min;
  map.y_min = grid.y_min;
  const size_t cells = map.plane_cells();
  while (r.remaining() > 0) {
    const uint32_t id = r.u32();
    const uint32_t bytes = r.u32();
    if (bytes != cells * 4) throw std::runtime_error("wire: plane size mismatch");
    map.channel_ids.push_back(static_cast<int>(id));
    const size_t base = map.data.size();
    map.data.resize(base + cells);
    r.bytes(map.data.data() + base, bytes);
    ++map.channels;
  }
  return map;
}

namespace {

std::vector<uint8_t> pack_detections(const DetectionPayload& p) {
  std::vector<uint8_t> out;
  Writer w(out);
  w.u32(static_cast<uint32_t>(p.records.size()));
  w.u32(0);
  for (const DetectionRecord& d : p.records) {
    for (float v : d.box) w.f32(v);
    w.f32(d.score);
  }
  return out;
}

DetectionPayload unpack_detections(std::span<const uint8_t> body) {
  Reader r(body);
  const uint32_t count = r.u32();
  r.u32();
  DetectionPayload p;
  p.records.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    for (float& v : p.records[i].box) v = r.f32();
    p.records[i].score = r.f32();
  }
  if (r.remaining() != 0) throw std::runtime_error("wire: trailing detection bytes");
  return p;
}

std::vector<uint8_t> pack_voxel_payload(const VoxelPayload& p) {
  std::vector<uint8_t> out;
  Writer w(out);
  w.u32(static_cast<uint32_t>(p.entries.size()));
  w.u32(static_cast<uint32_t>(kFeatureDim));
  w.u32(0);
  for (const auto& [k, f] : p.entries) {
    w.u32(k);
    w.bytes(f.data(), kFeatureDim * 4);
  }
  return out;
}

std::vector<uint8_t> pack_spatial_payload(const SpatialPayload& p) {
  std::vector<uint8_t> out;
  Writer w(out);
  w.u32(p.height);
  w.u32(p.width);
  for (const auto& [id, plane] : p.planes) {
    w.u32(id);
    w.u32(static_cast<uint32_t>(plane.size() * 4));
    w.bytes(plane.data(), plane.size() * 4);
  }
  return out;
}

}  // namespace

std::vector<uint8_t> pack_body(const FeatureMessage& msg) {
  if (const auto* v = std::get_if<VoxelPayload>(&msg.payload)) return pack_voxel_payload(*v);
  if (const auto* s = std::get_if<SpatialPayload>(&msg.payload)) return pack_spatial_payload(*s);
  return pack_detections(std::get<DetectionPayload>(msg.payload));
}

std::vector<uint8_t> compress(std::span<const uint8_t> body) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip container
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("wire: deflateInit failed");
  std::vector<uint8_t> out(deflateBound(&zs, static_cast<uLong>(body.size())) + 32);
  zs.next_in = const_cast<Bytef*>(body.data());
  zs.avail_in = static_cast<uInt>(body.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const size_t produced = out.size() - zs.avail_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("wire: deflate failed");
  out.resize(produced);
  return out;
}

std::vector<uint8_t> decompress(std::span<const uint8_t> wire_bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw std::runtime_error("wire: inflateInit failed");
  std::vector<uint8_t> out;
  std::vector<uint8_t> buf(1 << 16);
  zs.next_in = const_cast<Bytef*>(wire_bytes.data());
  zs.avail_in = static_cast<uInt>(wire_bytes.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error("wire: corrupted stream (checksum or format error)");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw std::runtime_error("wire: truncated stream");
  return out;
}

std::vector<uint8_t> encode_message(const FeatureMessage& msg) {
  std::vector<uint8_t> out;
  Writer w(out);
  w.bytes(kMagic, 4);
  w.u8(kWireVersion);
  w.u8(static_cast<uint8_t>(msg.kind));
  w.f64(msg.sender_pose.x);
  w.f64(msg.sender_pose.y);
  w.f64(msg.sender_pose.z);
  w.f64(msg.sender_pose.yaw);
  w.f64(msg.grid.x_min);
  w.f64(msg.grid.x_max);
  w.f64(msg.grid.y_min);
  w.f64(msg.grid.y_max);
  w.f64(msg.grid.z_min);
  w.f64(msg.grid.z_max);
  w.f64(msg.grid.vx);
  w.f64(msg.grid.vy);
  w.f64(msg.grid.vz);
  const auto mask = msg.mask.to_bytes();
  w.bytes(mask.data(), mask.size());
  w.u32(msg.entry_count());
  const auto body = pack_body(msg);
  const auto wire = compress(body);
  w.u32(static_cast<uint32_t>(wire.size()));
  w.bytes(wire.data(), wire.size());
  return out;
}

FeatureMessage decode_message(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("wire: bad magic");
  const uint8_t version = r.u8();
  if (version != kWireVersion) throw std::runtime_error("wire: unsupported version");
  FeatureMessage msg;
  const uint8_t kind = r.u8();
  if (kind < 1 || kind > 3) throw std::runtime_error("wire: unknown message kind");
  msg.kind = static_cast<MessageKind>(kind);
  msg.sender_pose.x = r.f64();
  msg.sender_pose.y = r.f64();
  msg.sender_pose.z = r.f64();
  msg.sender_pose.yaw = r.f64();
  msg.grid.x_min = r.f64();
  msg.grid.x_max = r.f64();
  msg.grid.y_min = r.f64();
  msg.grid.y_max = r.f64();
  msg.grid.z_min = r.f64();
  msg.grid.z_max = r.f64();
  msg.grid.vx = r.f64();
  msg.grid.vy = r.f64();
  msg.grid.vz = r.f64();
  std::array<uint8_t, 16> mask;
  r.bytes(mask.data(), 16);
  msg.mask = fusion::ChannelMask::from_bytes(mask);
  const uint32_t declared = r.u32();
  const uint32_t wire_len = r.u32();
  if (wire_len > r.remaining()) throw std::runtime_error("wire: truncated message");
  const auto body = decompress(r.rest().subspan(0, wire_len));

  switch (msg.kind) {
    case MessageKind::VoxelFeatures: {
      Reader br(body);
      const uint32_t count = br.u32();
      const uint32_t dim = br.u32();
      br.u32();
      if (dim != static_cast<uint32_t>(kFeatureDim))
        throw std::runtime_error("wire: unexpected feature dimension");
      VoxelPayload p;
      p.entries.reserve(count);
      uint32_t prev = 0;
      for (uint32_t i = 0; i < count; ++i) {
        const uint32_t key = br.u32();
        if (i > 0 && key <= prev)
          throw std::runtime_error("wire: voxel keys not strictly ascending");
        prev = key;
        Feature f;
        br.bytes(f.data(), kFeatureDim * 4);
        p.entries.emplace_back(key, f);
      }
      if (br.remaining() != 0) throw std::runtime_error("wire: trailing body bytes");
      msg.payload = std::move(p);
      break;
    }
    case MessageKind::SpatialFeatures: {
      Reader br(body);
      SpatialPayload p;
      p.height = br.u32();
      p.width = br.u32();
      const size_t cells = static_cast<size_t>(p.height) * p.width;
      while (br.remaining() > 0) {
        const uint32_t id = br.u32();
        const uint32_t bytes_ = br.u32();
        if (bytes_ != cells * 4) throw std::runtime_error("wire: plane size mismatch");
        std::vector<float> plane(cells);
        br.bytes(plane.data(), bytes_);
        p.planes.emplace_back(id, std::move(plane));
      }
      msg.payload = std::move(p);
      break;
    }
    case MessageKind::Detections:
      msg.payload = unpack_detections(body);
      break;
  }
  if (msg.entry_count() != declared)
    throw std::runtime_error("wire: entry count mismatch");
  return msg;
}

voxel::VoxelFeatureStore store_from_message(const FeatureMessage& msg) {
  const auto* p = std::get_if<VoxelPayload>(&msg.payload);
  if (!p) throw std::invalid_argument("wire: not a voxel feature message");
  voxel::VoxelFeatureStore store;
  store.spec = msg.grid;
  store.entries.reserve(p->entries.size());
  for (const auto& [k, f] : p->entries) store.entries.emplace(k, f);
  return store;
}

encoder::SpatialFeatureMap map_from_message(const FeatureMessage& msg) {
  const auto* p = std::get_if<SpatialPayload>(&msg.payload);
  if (!p) throw std::invalid_argument("wire: not a spatial feature message");
  encoder::SpatialFeatureMap map;
  map.height = static_cast<int>(p->height);
  map.width = static_cast<int>(p->width);
  map.origin = msg.sender_pose;
  map.cell = msg.grid.vx;
  map.x_min = msg.grid.x_min;
  map.y_min = msg.grid.y_min;
  map.data.reserve(p->planes.size() * map.plane_cells());
  for (const auto& [id, plane] : p->planes) {
    map.channel_ids.push_back(static_cast<int>(id));
    map.data.insert(map.data.end(), plane.begin(), plane.end());
    ++map.channels;
  }
  return map;
}

uint64_t body_logical_size(const FeatureMessage& msg) {
  if (const auto* v = std::get_if<VoxelPayload>(&msg.payload))
    return kVoxelBodyHeaderBytes + v->entries.size() * kVoxelEntryBytes;
  if (const auto* s = std::get_if<SpatialPayload>(&msg.payload)) {
    const uint64_t cells = static_cast<uint64_t>(s->height) * s->width;
    return kSpatialBodyHeaderBytes +
           s->planes.size() * (kSpatialPlaneHeaderBytes + cells * 4);
  }
  return kDetectionBodyHeaderBytes +
         std::get<DetectionPayload>(msg.payload).records.size() * kDetectionRecordBytes;
}

SizeReport size_report(const FeatureMessage& msg, uint64_t in_range_points) {
  SizeReport rep;
  const auto body = pack_body(msg);
  const auto wire = compress(body);
  rep.logical_bytes = kEnvelopeBytes + body.size();
  rep.wire_bytes = kEnvelopeBytes + 4 + wire.size();
  rep.ratio = rep.logical_bytes == 0
                  ? 1.0
                  : static_cast<double>(rep.wire_bytes) / static_cast<double>(rep.logical_bytes);
  rep.raw_reference_bytes = in_range_points * kRawPointBytes;
  return rep;
}

}  // namespace fcooper::wire
