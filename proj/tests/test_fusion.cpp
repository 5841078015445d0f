#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "fcooper/fusion.hpp"
#include "fcooper/rng.hpp"

using namespace fcooper;
using namespace fcooper::fusion;

namespace {

Feature random_feature(SplitMix64& rng) {
  Feature f;
  for (float& v : f) v = rng.next_unit_f() * 4.f - 2.f;
  return f;
}

voxel::VoxelFeatureStore random_store(const voxel::VoxelGridSpec& grid, int entries,
                                      uint64_t seed) {
  SplitMix64 rng(seed);
  voxel::VoxelFeatureStore s;
  s.spec = grid;
  while (static_cast<int>(s.entries.size()) < entries) {
    const uint32_t key = static_cast<uint32_t>(rng.bounded(grid.cell_count()));
    s.entries[key] = random_feature(rng);
  }
  return s;
}

encoder::SpatialFeatureMap random_map(int c, int h, int w, uint64_t seed) {
  encoder::SpatialFeatureMap m;
  m.channels = c;
  m.height = h;
  m.width = w;
  m.data.resize(static_cast<size_t>(c) * h * w);
  m.channel_ids.resize(c);
  SplitMix64 rng(seed);
  for (int i = 0; i < c; ++i) m.channel_ids[i] = i;
  for (float& v : m.data) v = rng.next_unit_f();
  return m;
}

}  // namespace

TEST_CASE("channel mask presets and parsing") {
  CHECK(ChannelMask::full().count() == 128);
  CHECK(ChannelMask::key_channels().count() == 45);
  CHECK(ChannelMask::min_channels().count() == 5);
  CHECK(ChannelMask::parse("full").count() == 128);
  CHECK(ChannelMask::parse("key") == ChannelMask::range(55, 99));
  CHECK(ChannelMask::parse("min") == ChannelMask::range(95, 99));
  CHECK(ChannelMask::parse("3-7").count() == 5);
  CHECK_THROWS_AS(ChannelMask::parse("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(ChannelMask::range(10, 5), std::invalid_argument);
  CHECK_THROWS_AS(ChannelMask::range(0, 128), std::invalid_argument);

  const auto m = ChannelMask::parse("55-99");
  CHECK(ChannelMask::from_bytes(m.to_bytes()) == m);
}

TEST_CASE("maxout_fuse basics") {
  const std::vector<float> a{1.f, -2.f, 3.f};
  const std::vector<float> b{0.f, 5.f, 3.f};
  CHECK(maxout_fuse(a, b) == std::vector<float>{1.f, 5.f, 3.f});
  CHECK(maxout_fuse(a, a) == a);
  CHECK_THROWS_AS(maxout_fuse(a, std::vector<float>{1.f}), std::invalid_argument);
}

TEST_CASE("maxout_fuse equals a scalar loop on random 128-d pairs") {
  SplitMix64 rng(15);
  for (int t = 0; t < 200; ++t) {
    const Feature a = random_feature(rng), b = random_feature(rng);
    const Feature got = maxout_fuse(a, b);
    for (int i = 0; i < kFeatureDim; ++i) {
      const float want = a[i] > b[i] ? a[i] : b[i];
      CHECK(got[i] == want);
    }
  }
}

TEST_CASE("maxout algebra: commutative, associative, idempotent, monotone") {
  SplitMix64 rng(16);
  for (int t = 0; t < 500; ++t) {
    const Feature a = random_feature(rng), b = random_feature(rng), c = random_feature(rng);
    const Feature ab = maxout_fuse(a, b), ba = maxout_fuse(b, a);
    for (int i = 0; i < kFeatureDim; ++i) {
      CHECK(ab[i] == ba[i]);
      CHECK(ab[i] >= a[i]);
      CHECK(ab[i] >= b[i]);
    }
    const Feature abc1 = maxout_fuse(ab, c), abc2 = maxout_fuse(a, maxout_fuse(b, c));
    const Feature aa = maxout_fuse(a, a);
    for (int i = 0; i < kFeatureDim; ++i) {
      CHECK(abc1[i] == abc2[i]);
      CHECK(aa[i] == a[i]);
    }
  }
}

TEST_CASE("alignment cases produce 1, 2, 4, 8 keys") {
  const auto grid = voxel::default_grid();

  SUBCASE("cell midpoint is interior") {
    const auto c = grid.center_of({10, 20, 3});
    const auto ac = classify_alignment(c, grid);
    CHECK(ac.kind == AlignmentKind::Interior);
    REQUIRE(ac.keys.size() == 1);
    CHECK(ac.keys[0] == voxel::VoxelKey{10, 20, 3});
  }

  SUBCASE("one plane gives a face with two keys") {
    geom::Point3 c{grid.x_min + 5 * grid.vx, grid.y_min + 20.5 * grid.vy,
                   grid.z_min + 3.5 * grid.vz};
    const auto ac = classify_alignment(c, grid);
    CHECK(ac.kind == AlignmentKind::Face);
    REQUIRE(ac.keys.size() == 2);
    CHECK(ac.keys[0] == voxel::VoxelKey{4, 20, 3});
    CHECK(ac.keys[1] == voxel::VoxelKey{5, 20, 3});
  }

  SUBCASE("two planes give an edge with four keys") {
    geom::Point3 c{grid.x_min + 5 * grid.vx, grid.y_min + 20 * grid.vy,
                   grid.z_min + 3.5 * grid.vz};
    const auto ac = classify_alignment(c, grid);
    CHECK(ac.kind == AlignmentKind::Edge);
    CHECK(ac.keys.size() == 4);
  }

  SUBCASE("three planes give a corner with eight keys") {
    geom::Point3 c{grid.x_min + 5 * grid.vx, grid.y_min + 20 * grid.vy,
                   grid.z_min + 3 * grid.vz};
    const auto ac = classify_alignment(c, grid);
    CHECK(ac.kind == AlignmentKind::Corner);
    CHECK(ac.keys.size() == 8);
  }

  SUBCASE("grid border clips the key set but keeps the kind") {
    geom::Point3 c{grid.x_min, grid.y_min + 20.5 * grid.vy, grid.z_min + 3.5 * grid.vz};
    const auto ac = classify_alignment(c, grid);
    CHECK(ac.kind == AlignmentKind::Face);
    CHECK(ac.keys.size() == 1);
  }
}

TEST_CASE("random continuous centers classify interior at tiny eps") {
  const auto grid = voxel::default_grid();
  SplitMix64 rng(17);
  int non_interior = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const geom::Point3 c{grid.x_min + rng.next_unit() * 70.4,
                         grid.y_min + rng.next_unit() * 80.0,
                         grid.z_min + rng.next_unit() * 4.0};
    if (classify_alignment(c, grid, 1e-9).kind != AlignmentKind::Interior) ++non_interior;
  }
  CHECK(non_interior < n / 100);
}

TEST_CASE("vff basics") {
  const auto grid = voxel::desk_grid();
  const auto receiver = random_store(grid, 200, 31);

  SUBCASE("empty sender returns the receiver unchanged") {
    voxel::VoxelFeatureStore sender;
    sender.spec = grid;
    const auto out = vff(receiver, sender, {});
    CHECK(out.entries.size() == receiver.entries.size());
    for (const auto& [k, f] : receiver.entries) {
      const auto& g = out.entries.at(k);
      for (int i = 0; i < kFeatureDim; ++i) CHECK(f[i] == g[i]);
    }
  }

  SUBCASE("identity self-fusion is idempotent") {
    const auto out = vff(receiver, receiver, {});
    REQUIRE(out.entries.size() == receiver.entries.size());
    for (const auto& [k, f] : receiver.entries) {
      const auto& g = out.entries.at(k);
      for (int i = 0; i < kFeatureDim; ++i) CHECK(f[i] == g[i]);
    }
  }

  SUBCASE("voxel size mismatch throws") {
    auto other = receiver;
    other.spec.vz = 0.2;
    CHECK_THROWS_AS(vff(receiver, other, {}), std::invalid_argument);
  }
}

TEST_CASE("vff under identity equals the dense element-wise max oracle") {
  const auto grid = voxel::desk_grid();
  SplitMix64 rng(33);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_store(grid, 300 + static_cast<int>(rng.bounded(200)), 100 + t);
    const auto b = random_store(grid, 300 + static_cast<int>(rng.bounded(200)), 200 + t);
    const auto fused = vff(a, b, {});

    // dense oracle over the whole grid
    for (uint64_t key = 0; key < grid.cell_count(); ++key) {
      const auto ia = a.entries.find(static_cast<uint32_t>(key));
      const auto ib = b.entries.find(static_cast<uint32_t>(key));
      const auto io = fused.entries.find(static_cast<uint32_t>(key));
      if (ia == a.entries.end() && ib == b.entries.end()) {
        CHECK(io == fused.entries.end());
        continue;
      }
      REQUIRE(io != fused.entries.end());
      for (int i = 0; i < kFeatureDim; ++i) {
        float want;
        if (ia == a.entries.end())
          want = ib->second[i];
        else if (ib == b.entries.end())
          want = ia->second[i];
        else
          want = std::max(ia->second[i], ib->second[i]);
        CHECK(io->second[i] == want);
      }
    }
  }
}

TEST_CASE("vff never decreases a receiver component") {
  const auto grid = voxel::desk_grid();
  const auto receiver = random_store(grid, 400, 51);
  const auto sender = random_store(grid, 400, 52);
  geom::RigidTransform2p5D t{0.01, 0.37, -0.21, 0.0};
  const auto fused = vff(receiver, sender, t);
  for (const auto& [k, f] : receiver.entries) {
    const auto& g = fused.entries.at(k);
    for (int i = 0; i < kFeatureDim; ++i) CHECK(g[i] >= f[i]);
  }
}

TEST_CASE("sff on coincident poses and identical maps is the identity") {
  const auto m = random_map(16, 40, 30, 61);
  const auto out = sff(m, m, {}, {}, ChannelMask::full());
  CHECK(out.height == m.height);
  CHECK(out.width == m.width);
  CHECK(out.data == m.data);
}

TEST_CASE("sff overlap arithmetic: 20 m ahead on the stock grid") {
  encoder::SpatialFeatureMap r;
  r.channels = 1;
  r.height = 400;
  r.width = 352;
  r.data.assign(static_cast<size_t>(400) * 352, 0.f);
  r.channel_ids = {0};
  r.cell = 0.2;
  r.x_min = 0.0;
  r.y_min = -40.0;
  auto s = r;
  for (float& v : s.data) v = 1.f;

  const geom::Pose receiver{0, 0, 0, 0};
  const geom::Pose sender{20.0, 0, 0, 0};
  const auto out = sff(r, s, receiver, sender, ChannelMask::full());

  // canvas spans x in [0, 90.4]: 452 cells
  CHECK(out.width == 452);
  CHECK(out.height == 400);

  // overlap depth 50.4 m = 252 cells of receiver columns carry sender values
  int overlap_cols = 0;
  for (int wx = 0; wx < 352; ++wx) {
    if (out.at(0, 200, wx) == 1.f) ++overlap_cols;
  }
  CHECK(overlap_cols == 252);
}

TEST_CASE("sff fuses overlap with max and keeps non-overlap bit-exact") {
  const int H = 30, W = 24;
  auto r = random_map(8, H, W, 71);
  auto s = random_map(8, H, W, 72);
  r.x_min = 0;
  r.y_min = -2.4;
  s.x_min = 0;
  s.y_min = -2.4;
  const geom::Pose receiver{0, 0, 0, 0};
  const geom::Pose sender{2.0, 1.0, 0, 0};  // lattice-aligned 10 x 5 cell shift
  const auto out = sff(r, s, receiver, sender, ChannelMask::full());

  CHECK(out.width == W + 10);
  CHECK(out.height == H + 5);
  for (int c = 0; c < 8; ++c) {
    for (int hy = 0; hy < out.height; ++hy) {
      for (int wx = 0; wx < out.width; ++wx) {
        const bool in_r = hy < H && wx < W;
        const bool in_s = hy >= 5 && wx >= 10;
        float want = 0.f;
        if (in_r) want = r.at(c, hy, wx);
        if (in_s) want = std::max(want, s.at(c, hy - 5, wx - 10));
        CHECK(out.at(c, hy, wx) == want);
      }
    }
  }
}

TEST_CASE("sff overlap is argument-order independent") {
  const int H = 20, W = 20;
  auto a = random_map(4, H, W, 81);
  auto b = random_map(4, H, W, 82);
  const geom::Pose pa{0, 0, 0, 0}, pb{1.0, 0.6, 0, 0};
  const auto ab = sff(a, b, pa, pb, ChannelMask::full());
  const auto ba = sff(b, a, pb, pa, ChannelMask::full());
  // the two canvases cover the same region; only the origin bookkeeping
  // (frame of reference) differs, cell values match index for index
  REQUIRE(ab.height == ba.height);
  REQUIRE(ab.width == ba.width);
  CHECK(ab.data == ba.data);
}

TEST_CASE("sff respects the channel mask") {
  auto r = random_map(8, 10, 10, 91);
  auto s = random_map(8, 10, 10, 92);
  ChannelMask two = ChannelMask::range(2, 3);
  const auto out = sff(r, s, {}, {}, two);
  for (int c = 0; c < 8; ++c) {
    for (size_t i = 0; i < out.plane_cells(); ++i) {
      const float want = (c == 2 || c == 3) ? std::max(r.plane(c)[i], s.plane(c)[i])
                                            : r.plane(c)[i];
      CHECK(out.plane(c)[i] == want);
    }
  }
}

TEST_CASE("sff cell size mismatch throws; disjoint footprints are a mosaic") {
  auto r = random_map(2, 10, 10, 93);
  auto s = random_map(2, 10, 10, 94);
  auto bad = s;
  bad.cell = 0.4;
  CHECK_THROWS_AS(sff(r, bad, {}, {}, ChannelMask::full()), std::invalid_argument);

  // far-apart footprints never overlap; both copies survive verbatim
  const auto out = sff(r, s, {0, 0, 0, 0}, {10.0, 0, 0, 0}, ChannelMask::full());
  CHECK(out.width == 60);
  for (int c = 0; c < 2; ++c)
    for (int hy = 0; hy < 10; ++hy)
      for (int wx = 0; wx < 10; ++wx) {
        CHECK(out.at(c, hy, wx) == r.at(c, hy, wx));
        CHECK(out.at(c, hy, wx + 50) == s.at(c, hy, wx));
      }
}

TEST_CASE("select_channels keeps order and metadata; expansion restores 128") {
  auto m = random_map(kFeatureDim, 12, 10, 95);

  const auto full = select_channels(m, ChannelMask::full());
  CHECK(full.channels == kFeatureDim);
  CHECK(full.data == m.data);

  const auto key = select_channels(m, ChannelMask::key_channels());
  CHECK(key.channels == 45);
  CHECK(key.channel_ids.front() == 55);
  CHECK(key.channel_ids.back() == 99);
  // payload scale factor 45/128
  CHECK(key.data.size() * 128 == m.data.size() * 45);

  const auto min = select_channels(m, ChannelMask::min_channels());
  CHECK(min.channels == 5);

  const auto expanded = expand_channels(key);
  CHECK(expanded.channels == kFeatureDim);
  for (int c = 0; c < kFeatureDim; ++c) {
    for (size_t i = 0; i < expanded.plane_cells(); ++i) {
      const float want = (c >= 55 && c <= 99) ? m.plane(c)[i] : 0.f;
      CHECK(expanded.plane(c)[i] == want);
    }
  }

  // select -> expand -> select is idempotent
  const auto again = select_channels(expanded, ChannelMask::key_channels());
  CHECK(again.data == key.data);
  CHECK(again.channel_ids == key.channel_ids);

  CHECK_THROWS_AS(select_channels(m, ChannelMask{}), std::invalid_argument);
  CHECK_THROWS_AS(select_channels(key, ChannelMask::range(0, 10)), std::invalid_argument);
}
