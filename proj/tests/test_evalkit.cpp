#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "fcooper/evalkit.hpp"
#include "fcooper/rng.hpp"

using namespace fcooper;
using namespace fcooper::evalkit;

namespace {

geom::Box3D random_box(SplitMix64& rng) {
  return {rng.next_unit() * 60.0,        rng.next_unit() * 40.0 - 20.0,
          rng.next_unit() * 2.0 - 2.0,   0.5 + rng.next_unit() * 5.0,
          0.5 + rng.next_unit() * 3.0,   0.5 + rng.next_unit() * 2.5,
          rng.next_unit() * 6.0 - 3.0};
}

}  // namespace

TEST_CASE("delta codec identities") {
  const geom::Box3D p{3, 4, -1, 4.5, 2, 1.6, 0.3};
  const auto zero = delta_encode(p, p);
  for (double v : zero) CHECK(v == doctest::Approx(0.0));
  const auto same = delta_decode(p, {0, 0, 0, 0, 0, 0, 0});
  CHECK(same == p);
}

TEST_CASE("delta codec worked example: sqrt(20) diagonal") {
  const geom::Box3D p{0, 0, 0, 4, 2, 1.5, 0};
  const geom::Box3D g{1, 1, 0, 4, 2, 1.5, 0};
  const auto d = delta_encode(p, g);
  CHECK(d[0] == doctest::Approx(0.223607).epsilon(1e-6));
  CHECK(d[1] == doctest::Approx(0.223607).epsilon(1e-6));
  for (int i = 2; i < 7; ++i) CHECK(d[i] == doctest::Approx(0.0));
}

TEST_CASE("delta decode with log-2 length delta doubles the length") {
  const geom::Box3D p{0, 0, 0, 4, 2, 1.5, 0};
  const auto g = delta_decode(p, {0, 0, 0, std::log(2.0), 0, 0, 0});
  CHECK(g.l == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(g.w == doctest::Approx(2.0));
}

TEST_CASE("delta codec round trips on random box pairs") {
  SplitMix64 rng(41);
  for (int t = 0; t < 100000; ++t) {
    const auto p = random_box(rng);
    const auto g = random_box(rng);
    const auto back = delta_decode(p, delta_encode(p, g));
    CHECK(back.cx == doctest::Approx(g.cx).epsilon(1e-6));
    CHECK(back.cy == doctest::Approx(g.cy).epsilon(1e-6));
    CHECK(back.cz == doctest::Approx(g.cz).epsilon(1e-6));
    CHECK(back.l == doctest::Approx(g.l).epsilon(1e-6));
    CHECK(back.w == doctest::Approx(g.w).epsilon(1e-6));
    CHECK(back.h == doctest::Approx(g.h).epsilon(1e-6));
    CHECK(back.yaw == doctest::Approx(g.yaw).epsilon(1e-6));
  }
}

TEST_CASE("delta codec rejects degenerate extents") {
  geom::Box3D bad{0, 0, 0, 0.0, 2, 1, 0};
  const geom::Box3D ok{0, 0, 0, 4, 2, 1, 0};
  CHECK_THROWS_AS(delta_encode(bad, ok), std::invalid_argument);
  CHECK_THROWS_AS(delta_encode(ok, bad), std::invalid_argument);
}

TEST_CASE("smooth L1 spot values and smoothness at the knee") {
  CHECK(smooth_l1(0.5) == doctest::Approx(0.125));
  CHECK(smooth_l1(2.0) == doctest::Approx(1.5));
  CHECK(smooth_l1(-2.0) == doctest::Approx(1.5));
  CHECK(smooth_l1(0.0) == doctest::Approx(0.0));
  // continuity and matched one-sided slopes at |x| = 1
  const double eps = 1e-7;
  CHECK(smooth_l1(1.0) == doctest::Approx(0.5));
  const double slope_in = (smooth_l1(1.0) - smooth_l1(1.0 - eps)) / eps;
  const double slope_out = (smooth_l1(1.0 + eps) - smooth_l1(1.0)) / eps;
  CHECK(slope_in == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(slope_out == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("binary cross entropy spot values") {
  CHECK(binary_cross_entropy(0.5, 0) == doctest::Approx(0.693147).epsilon(1e-4));
  CHECK(binary_cross_entropy(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-4));
  CHECK(binary_cross_entropy(1.0, 1) == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(binary_cross_entropy(0.0, 0) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("loss: perfect predictions drive the loss to zero") {
  const geom::Box3D anchor{0, 0, 0, 4, 2, 1.5, 0};
  const geom::Box3D truth{1, 0.5, 0, 4.2, 2.1, 1.5, 0.1};
  const std::vector<double> pos{1.0 - 1e-9};
  const std::vector<double> neg{1e-9};
  const std::vector<geom::Box3D> preds{truth}, truths{truth}, anchors{anchor};
  const double l = loss(pos, neg, preds, truths, anchors, {});
  CHECK(l == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("loss: single negative at one half") {
  const double l = loss({}, std::vector<double>{0.5}, {}, {}, {}, {});
  CHECK(l == doctest::Approx(0.6931).epsilon(1e-4));
}

TEST_CASE("loss is non-negative on random configurations") {
  SplitMix64 rng(43);
  for (int t = 0; t < 10000; ++t) {
    const int npos = static_cast<int>(rng.bounded(4));
    const int nneg = static_cast<int>(rng.bounded(4));
    std::vector<double> pos, neg;
    std::vector<geom::Box3D> preds, truths, anchors;
    for (int i = 0; i < npos; ++i) {
      pos.push_back(rng.next_unit());
      preds.push_back(random_box(rng));
      truths.push_back(random_box(rng));
      anchors.push_back(random_box(rng));
    }
    for (int i = 0; i < nneg; ++i) neg.push_back(rng.next_unit());
    LossConfig cfg{0.1 + rng.next_unit() * 3.0, 0.1 + rng.next_unit() * 3.0};
    CHECK(loss(pos, neg, preds, truths, anchors, cfg) >= 0.0);
  }
}

TEST_CASE("loss input validation") {
  const geom::Box3D b{0, 0, 0, 1, 1, 1, 0};
  CHECK_THROWS_AS(loss({}, {}, std::vector<geom::Box3D>{b}, std::vector<geom::Box3D>{b},
                       std::vector<geom::Box3D>{b}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(loss(std::vector<double>{0.5}, {}, std::vector<geom::Box3D>{b},
                       std::vector<geom::Box3D>{}, std::vector<geom::Box3D>{b}, {}),
                  std::invalid_argument);
  LossConfig bad{0.0, 1.0};
  CHECK_THROWS_AS(loss({}, std::vector<double>{0.5}, {}, {}, {}, bad), std::invalid_argument);
}

TEST_CASE("proxy detector: all-zero map yields nothing") {
  encoder::SpatialFeatureMap map;
  map.channels = kFeatureDim;
  map.height = 50;
  map.width = 44;
  map.data.assign(static_cast<size_t>(kFeatureDim) * 50 * 44, 0.f);
  map.channel_ids.resize(kFeatureDim);
  for (int c = 0; c < kFeatureDim; ++c) map.channel_ids[c] = c;
  CHECK(proxy_detect(map, {}).empty());
  for (const auto& s : anchor_scores(map, {})) CHECK(s.score == 0.0);
}

TEST_CASE("scene generation basics") {
  SceneConfig cfg;
  cfg.vehicle_poses = {{0, 0, 0, 0}, {10, -10, 0, geom::kPi / 2}};
  cfg.boxes = {{8, 0, -1.2, 4.5, 2.0, 1.6, 0.0}};

  SUBCASE("single box with no occluders is seen by both vehicles") {
    const auto scene = generate_scene(cfg, 5);
    REQUIRE(scene.clouds.size() == 2);
    CHECK(scene.clouds[0].size() > 20);
    CHECK(scene.clouds[1].size() > 20);
  }

  SUBCASE("same seed reproduces the clouds; different seed does not") {
    const auto a = generate_scene(cfg, 6);
    const auto b = generate_scene(cfg, 6);
    REQUIRE(a.clouds[0].size() == b.clouds[0].size());
    for (size_t i = 0; i < a.clouds[0].size(); ++i) {
      CHECK(a.clouds[0][i].x == b.clouds[0][i].x);
      CHECK(a.clouds[0][i].y == b.clouds[0][i].y);
    }
    const auto c = generate_scene(cfg, 7);
    bool differs = a.clouds[0].size() != c.clouds[0].size();
    for (size_t i = 0; !differs && i < a.clouds[0].size(); ++i)
      differs = a.clouds[0][i].x != c.clouds[0][i].x;
    CHECK(differs);
  }

  SUBCASE("points land on the box surface") {
    const auto scene = generate_scene(cfg, 8);
    const auto& box = cfg.boxes[0];
    for (const auto& p : scene.clouds[0]) {
      // inside the box inflated a hair, outside the box deflated a hair
      const double lx = p.x - box.cx, ly = p.y - box.cy, lz = p.z - box.cz;
      CHECK(std::abs(lx) <= box.l / 2 + 1e-3);
      CHECK(std::abs(ly) <= box.w / 2 + 1e-3);
      CHECK(std::abs(lz) <= box.h / 2 + 1e-3);
      const bool interior = std::abs(lx) < box.l / 2 - 1e-3 &&
                            std::abs(ly) < box.w / 2 - 1e-3 &&
                            std::abs(lz) < box.h / 2 - 1e-3;
      CHECK_FALSE(interior);
    }
  }

  SUBCASE("config validation") {
    SceneConfig bad = cfg;
    bad.vehicle_poses.resize(1);
    CHECK_THROWS_AS(generate_scene(bad, 1), std::invalid_argument);
    bad = cfg;
    bad.azimuth_step_deg = 0.0;
    CHECK_THROWS_AS(generate_scene(bad, 1), std::invalid_argument);
    bad = cfg;
    bad.boxes[0].l = -1.0;
    CHECK_THROWS_AS(generate_scene(bad, 1), std::invalid_argument);
  }
}

TEST_CASE("occlusion: a box directly behind another is hidden from car 1 only") {
  SceneConfig cfg;
  cfg.vehicle_poses = {{0, 0, 0, 0}, {10, -14, 0, geom::kPi / 2}};
  // B sits right behind A on car 1's line of sight
  cfg.boxes = {{8, 0, -1.2, 4.5, 2.0, 1.6, 0.0},     // A
               {14.5, 0, -1.2, 4.5, 2.0, 1.6, 0.0}};  // B
  const auto scene = generate_scene(cfg, 9);

  auto count_on_box = [&](const voxel::PointCloud& cloud, const geom::Pose& pose,
                          const geom::Box3D& box) {
    const auto t = geom::relative_transform(geom::Pose{}, pose);  // sensor -> world
    int n = 0;
    for (const auto& p : cloud) {
      const auto q = geom::apply_transform(t, {p.x, p.y, p.z});
      if (std::abs(q.x - box.cx) <= box.l / 2 + 1e-3 &&
          std::abs(q.y - box.cy) <= box.w / 2 + 1e-3 &&
          std::abs(q.z - box.cz) <= box.h / 2 + 1e-3)
        ++n;
    }
    return n;
  };

  const int car1_on_b = count_on_box(scene.clouds[0], cfg.vehicle_poses[0], cfg.boxes[1]);
  const int car2_on_b = count_on_box(scene.clouds[1], cfg.vehicle_poses[1], cfg.boxes[1]);
  CHECK(car1_on_b == 0);
  CHECK(car2_on_b > 10);
}

TEST_CASE("precision: exact detections score 100 in populated buckets") {
  std::vector<geom::Box3D> truths{{5, 0, -1, 4.5, 2, 1.6, 0}, {30, 3, -1, 4.5, 2, 1.6, 0.5}};
  std::vector<Detection> dets;
  for (const auto& t : truths) dets.push_back({t, 0.9});
  const auto rep = precision(dets, truths);
  REQUIRE(rep.near_pct.has_value());
  REQUIRE(rep.far_pct.has_value());
  CHECK(*rep.near_pct == doctest::Approx(100.0));
  CHECK(*rep.far_pct == doctest::Approx(100.0));
  CHECK(rep.truths_near == 1);
  CHECK(rep.truths_far == 1);
}

TEST_CASE("precision: one TP plus one FP in the near bucket is 50") {
  std::vector<geom::Box3D> truths{{5, 0, -1, 4.5, 2, 1.6, 0}};
  std::vector<Detection> dets{{truths[0], 0.9}, {{12, 5, -1, 4.5, 2, 1.6, 0}, 0.8}};
  const auto rep = precision(dets, truths);
  REQUIRE(rep.near_pct.has_value());
  CHECK(*rep.near_pct == doctest::Approx(50.0));
  CHECK_FALSE(rep.far_pct.has_value());  // no far detections: bucket is N/A
}

TEST_CASE("precision matches an exhaustive assignment oracle on small scenes") {
  SplitMix64 rng(47);
  for (int t = 0; t < 60; ++t) {
    // up to 6 disjoint truths
    std::vector<geom::Box3D> truths;
    const int nt = 1 + static_cast<int>(rng.bounded(6));
    for (int i = 0; i < nt; ++i)
      truths.push_back({8.0 * i + rng.next_unit(), rng.next_unit() * 10 - 5,
                        -1.0, 4.2, 2.0, 1.6, 0.0});
    std::vector<Detection> dets;
    for (const auto& tr : truths) {
      if (rng.next_unit() < 0.75) {
        geom::Box3D d = tr;
        d.cx += rng.next_unit() * 0.4 - 0.2;  // stays above the IoU threshold
        dets.push_back({d, rng.next_unit()});
      }
      if (rng.next_unit() < 0.4) {
        geom::Box3D d = tr;
        d.cx += 3.0 + rng.next_unit();  // a clear miss
        dets.push_back({d, rng.next_unit()});
      }
    }

    const auto rep = precision(dets, truths);

    // oracle: maximize matched pairs over all injective det->truth maps
    std::vector<std::vector<int>> cand(dets.size());
    for (size_t i = 0; i < dets.size(); ++i)
      for (size_t j = 0; j < truths.size(); ++j)
        if (geom::iou_3d(dets[i].box, truths[j]) >= 0.7)
          cand[i].push_back(static_cast<int>(j));
    int best = 0;
    std::vector<bool> used(truths.size(), false);
    auto rec = [&](auto&& self, size_t i, int matched) -> void {
      best = std::max(best, matched);
      if (i == dets.size()) return;
      self(self, i + 1, matched);
      for (int j : cand[i]) {
        if (!used[j]) {
          used[j] = true;
          self(self, i + 1, matched + 1);
          used[j] = false;
        }
      }
    };
    rec(rec, 0, 0);

    CHECK(rep.near_tp + rep.far_tp == best);
    CHECK(rep.near_tp + rep.far_tp + rep.near_fp + rep.far_fp ==
          static_cast<int>(dets.size()));
  }
}

TEST_CASE("drift on transformed keys moves at most one cell per axis") {
  const auto grid = voxel::desk_grid();
  SplitMix64 rng(53);
  for (int t = 0; t < 20000; ++t) {
    const geom::Point3 c{grid.x_min + rng.next_unit() * 17.0,
                         grid.y_min + rng.next_unit() * 19.0,
                         grid.z_min + rng.next_unit() * 3.9};
    const double phi = rng.next_unit() * 2 * geom::kPi;
    const geom::Point3 d{c.x + 0.1 * std::cos(phi), c.y + 0.1 * std::sin(phi), c.z};
    const auto ka = voxel::voxel_index(grid, c);
    const auto kb = voxel::voxel_index(grid, d);
    if (!ka || !kb) continue;
    CHECK(std::abs(ka->ix - kb->ix) <= 1);
    CHECK(std::abs(ka->iy - kb->iy) <= 1);
    CHECK(ka->iz == kb->iz);
  }
}

TEST_CASE("drift experiment: zero drift reproduces the baseline, reports cover both paradigms") {
  const auto cfg = occlusion_scene(3);
  const auto weights = encoder::EncoderWeights::from_seed(3);
  const auto rep = drift_experiment(cfg, weights, 0.0, 2, 3);
  CHECK(rep.drift_m == 0.0);
  REQUIRE(rep.trials.size() == 2);
  REQUIRE(rep.baseline_vff.size() == cfg.boxes.size());
  REQUIRE(rep.baseline_sff.size() == cfg.boxes.size());
  for (const auto& trial : rep.trials) {
    REQUIRE(trial.vff.size() == rep.baseline_vff.size());
    for (size_t i = 0; i < trial.vff.size(); ++i) {
      CHECK(trial.vff[i].score == rep.baseline_vff[i].score);
      CHECK(trial.vff[i].detected == rep.baseline_vff[i].detected);
      CHECK(trial.sff[i].score == rep.baseline_sff[i].score);
    }
  }
  CHECK_THROWS_AS(drift_experiment(cfg, weights, -0.1, 1, 3), std::invalid_argument);
}
