// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "lmot/common.hpp"
#include "lmot/synth/synth.hpp"

using namespace lmot;
using namespace lmot::synth;

namespace {

bool same_box(const BBox3D& a, const BBox3D& b) {
  return a.center == b.center && a.size == b.size && a.yaw == b.yaw;
}

// point membership in an oriented box, via local coordinates
bool inside_box(const pc::PointXYZI& p, const BBox3D& box, double tol) {
  const double dx = p.x - box.center[0], dy = p.y - box.center[1], dz = p.z - box.center[2];
  const double cs = std::cos(box.yaw), sn = std::sin(box.yaw);
  const double lu = dx * cs + dy * sn;    // along length
  const double lv = -dx * sn + dy * cs;   // along width
  return std::abs(lu) <= box.size[1] * 0.5 + tol && std::abs(lv) <= box.size[0] * 0.5 + tol &&
         std::abs(dz) <= box.size[2] * 0.5 + tol;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("config validation rejects malformed settings") {
  SceneConfig ok;
  CHECK_NOTHROW(ok.validate());

  SceneConfig c = ok;
  c.frame_count = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ok;
  c.min_objects = 5;
  c.max_objects = 2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ok;
  c.spawn_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ok;
  c.max_speed = c.min_speed - 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ok;
  c.extent = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);

  DetectorNoise n;
  CHECK_NOTHROW(n.validate());
  n.drop_prob = 2.0;
  CHECK_THROWS_AS(n.validate(), ValidationError);
  n = DetectorNoise{};
  n.sigma_pos = -0.1;
  CHECK_THROWS_AS(n.validate(), ValidationError);

  PointSampling s;
  CHECK_NOTHROW(s.validate());
  s.points_per_object = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("fixed population persists across every frame") {
  SceneConfig cfg;
  cfg.frame_count = 20;
  cfg.min_objects = 3;
  cfg.max_objects = 3;
  cfg.seed = 7;
  const FrameSequence seq = generate_scene(cfg);

  CHECK(seq.id == "synth-7");
  REQUIRE(seq.frames.size() == 20);
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const Frame& fr = seq.frames[f];
    CHECK(fr.frame_idx == static_cast<int>(f));
    CHECK(fr.timestamp_us == static_cast<std::int64_t>(f) * 500000);
    REQUIRE(fr.ground_truth.size() == 3);
    std::set<std::int64_t> ids;
    for (const auto& g : fr.ground_truth) ids.insert(g.instance_id);
    CHECK(ids == std::set<std::int64_t>{0, 1, 2});
  }
  // identity, class, and size are fixed for an object's whole life
  for (int i = 0; i < 3; ++i) {
    const auto& first = seq.frames.front().ground_truth[static_cast<std::size_t>(i)];
    for (const Frame& fr : seq.frames) {
      const auto& g = fr.ground_truth[static_cast<std::size_t>(i)];
      CHECK(g.instance_id == first.instance_id);
      CHECK(g.class_id == first.class_id);
      CHECK(g.box.size == first.box.size);
    }
  }
}

TEST_CASE("constant speed advances centers by speed times period") {
  SceneConfig cfg;
  cfg.frame_count = 6;
  cfg.frame_period = 0.5;
  cfg.min_objects = 5;
  cfg.max_objects = 5;
  cfg.min_speed = 2.0;
  cfg.max_speed = 2.0;
  cfg.extent = 100.0;  // no wall contact within six frames
  cfg.ego_speed = 0.0; // ego may still rotate in place
  cfg.seed = 21;
  const FrameSequence seq = generate_scene(cfg);

  for (int i = 0; i < 5; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const int cls = seq.frames[0].ground_truth[idx].class_id;
    const ClassSpec& spec = class_specs()[static_cast<std::size_t>(cls)];
    const double step = 2.0 * spec.speed_scale * cfg.frame_period;

    std::vector<std::array<double, 3>> world;
    for (const Frame& fr : seq.frames) {
      const auto& g = fr.ground_truth[idx];
      CHECK(g.box.center[2] == doctest::Approx(g.box.size[2] * 0.5).epsilon(1e-12));
      world.push_back(fr.ego_pose.apply_point(g.box.center));
    }
    std::array<double, 2> prev_delta{0, 0};
    for (std::size_t f = 1; f < world.size(); ++f) {
      const double dx = world[f][0] - world[f - 1][0];
      const double dy = world[f][1] - world[f - 1][1];
      CHECK(std::hypot(dx, dy) == doctest::Approx(step).epsilon(1e-9));
      CHECK(world[f][2] == doctest::Approx(world[f - 1][2]).epsilon(1e-12));
      if (!spec.turning && f > 1) {  // straight-line motion repeats the step vector
        CHECK(dx == doctest::Approx(prev_delta[0]).epsilon(1e-9));
        CHECK(dy == doctest::Approx(prev_delta[1]).epsilon(1e-9));
      }
      prev_delta = {dx, dy};
    }
  }
}

TEST_CASE("generation is a pure function of the seed") {
  SceneConfig cfg;
  cfg.spawn_prob = 0.3;
  cfg.despawn_prob = 0.05;
  cfg.seed = 42;
  const FrameSequence a = generate_scene(cfg);
  const FrameSequence b = generate_scene(cfg);

  REQUIRE(a.frames.size() == b.frames.size());
  CHECK(a.id == b.id);
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    const Frame& fa = a.frames[f];
    const Frame& fb = b.frames[f];
    CHECK(fa.timestamp_us == fb.timestamp_us);
    CHECK(fa.ego_pose.matrix() == fb.ego_pose.matrix());
    REQUIRE(fa.ground_truth.size() == fb.ground_truth.size());
    for (std::size_t i = 0; i < fa.ground_truth.size(); ++i) {
      const auto& ga = fa.ground_truth[i];
      const auto& gb = fb.ground_truth[i];
      CHECK(ga.instance_id == gb.instance_id);
      CHECK(ga.class_id == gb.class_id);
      CHECK(same_box(ga.box, gb.box));
    }
  }

  cfg.seed = 43;
  const FrameSequence c = generate_scene(cfg);
  bool differs = c.frames.size() != a.frames.size();
  if (!differs) {
    for (std::size_t f = 0; f < a.frames.size() && !differs; ++f) {
      if (a.frames[f].ground_truth.size() != c.frames[f].ground_truth.size()) differs = true;
      for (std::size_t i = 0; !differs && i < a.frames[f].ground_truth.size(); ++i)
        if (!same_box(a.frames[f].ground_truth[i].box, c.frames[f].ground_truth[i].box))
          differs = true;
    }
  }
  CHECK(differs);

  const auto da = simulate_detector(a, DetectorNoise::typical(), 9);
  const auto db = simulate_detector(b, DetectorNoise::typical(), 9);
  REQUIRE(da.size() == db.size());
  for (std::size_t f = 0; f < da.size(); ++f) {
    REQUIRE(da[f].size() == db[f].size());
    for (std::size_t i = 0; i < da[f].size(); ++i) {
      CHECK(same_box(da[f][i].box, db[f][i].box));
      CHECK(da[f][i].class_id == db[f][i].class_id);
      CHECK(da[f][i].score == db[f][i].score);
    }
  }
}

TEST_CASE("spawn and despawn keep instance ids unique and contiguous") {
  SceneConfig cfg;
  cfg.frame_count = 40;
  cfg.min_objects = 3;
  cfg.max_objects = 6;
  cfg.spawn_prob = 0.5;
  cfg.despawn_prob = 0.1;
  cfg.seed = 11;
  const FrameSequence seq = generate_scene(cfg);

  std::map<std::int64_t, std::vector<int>> presence;
  for (const Frame& fr : seq.frames) {
    std::set<std::int64_t> in_frame;
    for (const auto& g : fr.ground_truth) {
      CHECK(in_frame.insert(g.instance_id).second);  // unique within the frame
      presence[g.instance_id].push_back(fr.frame_idx);
    }
  }
  CHECK(presence.size() > 3);  // churn actually happened under this seed
  bool any_despawn = false;
  for (const auto& [id, frames] : presence) {
    CHECK(id >= 0);
    // a life is one contiguous run of frames: never reused after despawning
    CHECK(frames.back() - frames.front() + 1 == static_cast<int>(frames.size()));
    if (frames.back() != seq.frames.back().frame_idx) any_despawn = true;
  }
  CHECK(any_despawn);
}

TEST_CASE("zero noise reproduces ground truth with unit scores") {
  SceneConfig cfg;
  cfg.seed = 3;
  const FrameSequence seq = generate_scene(cfg);
  const auto dets = simulate_detector(seq, DetectorNoise{}, 5);

  REQUIRE(dets.size() == seq.frames.size());
  for (std::size_t f = 0; f < dets.size(); ++f) {
    const auto& gts = seq.frames[f].ground_truth;
    REQUIRE(dets[f].size() == gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      CHECK(same_box(dets[f][i].box, gts[i].box));
      CHECK(dets[f][i].class_id == gts[i].class_id);
      CHECK(dets[f][i].score == 1.0);
    }
  }
}

TEST_CASE("drop and flip extremes behave exactly") {
  SceneConfig cfg;
  cfg.seed = 13;
  const FrameSequence seq = generate_scene(cfg);

  DetectorNoise all_dropped;
  all_dropped.drop_prob = 1.0;
  for (const auto& frame_dets : simulate_detector(seq, all_dropped, 1))
    CHECK(frame_dets.empty());

  DetectorNoise flipped;
  flipped.orientation_flip_prob = 1.0;
  const auto dets = simulate_detector(seq, flipped, 1);
  for (std::size_t f = 0; f < dets.size(); ++f) {
    const auto& gts = seq.frames[f].ground_truth;
    REQUIRE(dets[f].size() == gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const double diff = std::abs(normalize_yaw(dets[f][i].box.yaw - gts[i].box.yaw));
      CHECK(diff == doctest::Approx(M_PI).epsilon(1e-12));
    }
  }
}

TEST_CASE("empirical drop rate stays within three sigma of the configured one") {
  SceneConfig cfg;
  cfg.frame_count = 1250;
  cfg.min_objects = 8;
  cfg.max_objects = 8;
  cfg.seed = 17;
  const FrameSequence seq = generate_scene(cfg);  // 10000 object observations

  DetectorNoise noise;
  noise.drop_prob = 0.3;
  std::size_t kept = 0;
  for (const auto& frame_dets : simulate_detector(seq, noise, 23)) kept += frame_dets.size();

  const double n = 10000.0;
  const double empirical = 1.0 - static_cast<double>(kept) / n;
  const double bound = 3.0 * std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(empirical - 0.3) <= bound);
}

TEST_CASE("beta score model matches its mean and clutter stays in range") {
  SceneConfig cfg;
  cfg.frame_count = 400;
  cfg.min_objects = 8;
  cfg.max_objects = 8;
  cfg.seed = 29;
  const FrameSequence seq = generate_scene(cfg);

  DetectorNoise noise;
  noise.tp_score_alpha = 8.0;
  noise.tp_score_beta = 2.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& frame_dets : simulate_detector(seq, noise, 31)) {
    for (const Detection& d : frame_dets) {
      CHECK(d.score >= 0.0);
      CHECK(d.score <= 1.0);
      sum += d.score;
      ++count;
    }
  }
  REQUIRE(count == 3200);
  CHECK(sum / static_cast<double>(count) == doctest::Approx(0.8).epsilon(0.02));

  DetectorNoise clutter;
  clutter.drop_prob = 1.0;
  clutter.fp_rate = 3.0;
  clutter.fp_score_alpha = 2.0;
  clutter.fp_score_beta = 5.0;
  clutter.fp_extent = 12.0;
  std::size_t fp_total = 0;
  for (const auto& frame_dets : simulate_detector(seq, clutter, 37)) {
    fp_total += frame_dets.size();
    for (const Detection& d : frame_dets) {
      CHECK(std::abs(d.box.center[0]) <= 12.0);
      CHECK(std::abs(d.box.center[1]) <= 12.0);
      CHECK(d.box.center[2] == d.box.size[2] * 0.5);
      CHECK(d.class_id >= 0);
      CHECK(d.class_id < static_cast<int>(class_specs().size()));
      CHECK(d.score >= 0.0);
      CHECK(d.score <= 1.0);
      CHECK_NOTHROW(d.validate(ClassTable()));
    }
  }
  // Poisson(3) over 400 frames: mean count within 3 sigma
  const double mean_fp = static_cast<double>(fp_total) / 400.0;
  CHECK(std::abs(mean_fp - 3.0) <= 3.0 * std::sqrt(3.0 / 400.0));
}

TEST_CASE("sampled points lie on box surfaces or in the ground band") {
  SceneConfig cfg;
  cfg.seed = 5;
  const FrameSequence seq = generate_scene(cfg);
  const Frame& frame = seq.frames.front();

  PointSampling sampling;
  sampling.points_per_object = 64;
  sampling.ground_points = 128;
  const pc::PointCloud cloud = sample_box_points(frame, sampling, 9);

  CHECK(cloud.timestamp_us == frame.timestamp_us);
  REQUIRE(cloud.points.size() == 64 * frame.ground_truth.size() + 128);
  CHECK_NOTHROW(cloud.validate());
  for (const auto& p : cloud.points) {
    bool on_box = false;
    for (const auto& g : frame.ground_truth)
      if (inside_box(p, g.box, 1e-9)) {
        on_box = true;
        break;
      }
    const bool on_ground = std::abs(p.z) <= sampling.ground_band &&
                           std::abs(p.x) <= sampling.ground_extent &&
                           std::abs(p.y) <= sampling.ground_extent;
    CHECK((on_box || on_ground));
    CHECK(p.intensity >= 0.0f);
    CHECK(p.intensity <= 1.0f);
  }

  // the convenience overload forwards to the same sampler
  const pc::PointCloud again = sample_box_points(frame, 64, 128, 9);
  REQUIRE(again.points.size() == cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    CHECK(again.points[i].x == cloud.points[i].x);
    CHECK(again.points[i].y == cloud.points[i].y);
    CHECK(again.points[i].z == cloud.points[i].z);
    CHECK(again.points[i].intensity == cloud.points[i].intensity);
  }
}

TEST_CASE("empty scenes yield only the requested clutter") {
  Frame frame;
  frame.frame_idx = 0;
  frame.timestamp_us = 0;

  PointSampling none;
  none.ground_points = 0;
  CHECK(sample_box_points(frame, none, 1).points.empty());

  PointSampling ground_only;
  ground_only.ground_points = 50;
  const pc::PointCloud cloud = sample_box_points(frame, ground_only, 1);
  REQUIRE(cloud.points.size() == 50);
  for (const auto& p : cloud.points) CHECK(std::abs(p.z) <= ground_only.ground_band);
}

TEST_CASE("inverse-square density thins far objects") {
  Frame frame;
  frame.frame_idx = 0;
  frame.timestamp_us = 0;
  for (double x : {10.0, 20.0}) {
    GroundTruthObject g;
    g.box.center = {x, 0.0, 0.85};
    g.box.size = {1.9, 4.5, 1.7};
    g.box.yaw = 0.0;
    g.class_id = 2;
    g.instance_id = x < 15.0 ? 0 : 1;
    frame.ground_truth.push_back(g);
  }

  PointSampling sampling;
  sampling.points_per_object = 64;
  sampling.ground_points = 0;
  sampling.inverse_square = true;
  sampling.reference_distance = 10.0;
  const pc::PointCloud cloud = sample_box_points(frame, sampling, 3);

  std::size_t near = 0, far = 0;
  for (const auto& p : cloud.points) (p.x < 15.0 ? near : far) += 1;
  CHECK(near == 64);  // at the reference distance: full budget
  CHECK(far == 16);   // twice the distance: a quarter of the budget
}

}  // TEST_SUITE
