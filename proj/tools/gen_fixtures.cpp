// Regenerates the golden message fixtures under fixtures/. The committed
// files pin the wire format; rerun only on a deliberate format change.
#include <cstdio>
#include <fstream>

#include "fcooper/evalkit.hpp"
#include "fcooper/rng.hpp"
#include "fcooper/wire.hpp"

using namespace fcooper;

namespace {

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  std::printf("%s: %zu bytes\n", path.c_str(), bytes.size());
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "fixtures";
  SplitMix64 rng(20240);

  voxel::VoxelFeatureStore store;
  store.spec = voxel::desk_grid();
  for (int i = 0; i < 12; ++i) {
    Feature f;
    for (float& v : f) v = rng.next_unit_f();
    store.entries.emplace(static_cast<uint32_t>(i * 977 + 13), f);
  }
  write_file(dir + "/voxel_msg_v1.fcpr",
             wire::encode_message(wire::make_voxel_message(store, {1.5, -2.0, 0.25, 0.5})));

  encoder::SpatialFeatureMap map;
  map.channels = kFeatureDim;
  map.height = 12;
  map.width = 16;
  map.data.assign(static_cast<size_t>(map.channels) * 12 * 16, 0.f);
  map.channel_ids.resize(kFeatureDim);
  for (int c = 0; c < kFeatureDim; ++c) map.channel_ids[c] = c;
  for (int i = 0; i < 400; ++i) {
    const size_t at = rng.bounded(map.data.size());
    map.data[at] = rng.next_unit_f();
  }
  write_file(dir + "/spatial_msg_v1.fcpr",
             wire::encode_message(wire::make_spatial_message(
                 map, fusion::ChannelMask::key_channels(), {0.0, 0.0, 0.0, 0.0})));

  wire::FeatureMessage det = wire::make_detection_message(
      {{{10.f, 2.f, -1.2f, 4.5f, 2.f, 1.6f, 0.f}, 0.9f},
       {{15.f, -3.f, -1.2f, 4.5f, 2.f, 1.6f, 1.5708f}, 0.75f}},
      voxel::desk_grid(), {0.0, 0.0, 0.0, 0.0});
  write_file(dir + "/detections_msg_v1.fcpr", wire::encode_message(det));
  return 0;
}
