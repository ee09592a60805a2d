// SPDX-License-Identifier: Apache-2.0
#include "lmot/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lmot/common.hpp"

namespace lmot::synth {

namespace {

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(what) + " outside [0,1]");
}

double draw_normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> n(0.0, sigma);
  return n(rng);
}

// Beta via two gammas; non-positive shapes mean a deterministic 1.
double draw_score(std::mt19937_64& rng, double alpha, double beta) {
  if (alpha <= 0.0 || beta <= 0.0) return 1.0;
  std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
  const double x = ga(rng), y = gb(rng);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

}  // namespace

void SceneConfig::validate() const {
  if (frame_count < 1) throw ValidationError("SceneConfig: frame_count must be positive");
  if (!(frame_period > 0.0)) throw ValidationError("SceneConfig: frame_period must be positive");
  if (min_objects < 0 || max_objects < min_objects)
    throw ValidationError("SceneConfig: invalid object count range");
  check_prob(spawn_prob, "SceneConfig: spawn_prob");
  check_prob(despawn_prob, "SceneConfig: despawn_prob");
  if (!(min_speed >= 0.0) || max_speed < min_speed)
    throw ValidationError("SceneConfig: invalid speed range");
  if (!(extent > 0.0)) throw ValidationError("SceneConfig: extent must be positive");
  if (!(ego_speed >= 0.0)) throw ValidationError("SceneConfig: ego_speed must be non-negative");
}

void DetectorNoise::validate() const {
  check_prob(drop_prob, "DetectorNoise: drop_prob");
  check_prob(orientation_flip_prob, "DetectorNoise: orientation_flip_prob");
  if (!(fp_rate >= 0.0)) throw ValidationError("DetectorNoise: fp_rate must be non-negative");
  if (!(sigma_pos >= 0.0) || !(sigma_size >= 0.0) || !(sigma_yaw >= 0.0))
    throw ValidationError("DetectorNoise: sigmas must be non-negative");
  if (!(fp_extent > 0.0)) throw ValidationError("DetectorNoise: fp_extent must be positive");
}

DetectorNoise DetectorNoise::typical() {
  DetectorNoise n;
  n.drop_prob = 0.1;
  n.fp_rate = 0.5;
  n.sigma_pos = 0.3;
  n.sigma_size = 0.1;
  n.sigma_yaw = 0.1;
  n.orientation_flip_prob = 0.05;
  n.tp_score_alpha = 8.0;
  n.tp_score_beta = 2.0;
  n.fp_score_alpha = 2.0;
  n.fp_score_beta = 5.0;
  return n;
}

void PointSampling::validate() const {
  if (points_per_object < 0 || ground_points < 0)
    throw ValidationError("PointSampling: counts must be non-negative");
  if (!(reference_distance > 0.0))
    throw ValidationError("PointSampling: reference_distance must be positive");
  if (!(ground_extent > 0.0) || !(ground_band >= 0.0))
    throw ValidationError("PointSampling: invalid ground geometry");
}

const std::vector<ClassSpec>& class_specs() {
  // Aligned with the default ClassTable: bicycle, bus, car, motorcycle,
  // pedestrian, trailer, truck.
  static const std::vector<ClassSpec> specs{
      {0.6, 1.7, 1.4, true, 0.5},  {2.9, 11.0, 3.2, false, 1.0}, {1.9, 4.5, 1.7, false, 1.0},
      {0.8, 2.1, 1.4, true, 0.8},  {0.7, 0.7, 1.8, true, 0.2},   {2.6, 9.0, 3.5, false, 0.8},
      {2.5, 7.0, 2.8, false, 0.9},
  };
  return specs;
}

namespace {

struct SimObject {
  std::int64_t id = 0;
  int class_id = 0;
  std::array<double, 3> size{};
  double x = 0, y = 0, heading = 0, speed = 0, turn_rate = 0;
};

SimObject spawn_object(std::mt19937_64& rng, const SceneConfig& cfg, std::int64_t id) {
  const auto& specs = class_specs();
  SimObject o;
  o.id = id;
  o.class_id = static_cast<int>(rng() % specs.size());
  const ClassSpec& spec = specs[static_cast<std::size_t>(o.class_id)];
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  o.size = {spec.w * jitter(rng), spec.l * jitter(rng), spec.h * jitter(rng)};
  const double margin = std::max(0.0, std::min(cfg.extent * 0.9, cfg.extent - 1.0));
  std::uniform_real_distribution<double> place(-margin, margin);
  o.x = place(rng);
  o.y = place(rng);
  std::uniform_real_distribution<double> dir(-M_PI, M_PI);
  o.heading = dir(rng);
  std::uniform_real_distribution<double> sp(cfg.min_speed, cfg.max_speed);
  o.speed = sp(rng) * spec.speed_scale;
  if (spec.turning) {
    std::uniform_real_distribution<double> tr(-0.3, 0.3);
    o.turn_rate = tr(rng);
  }
  return o;
}

void advance_object(SimObject& o, double dt, double extent) {
  o.x += o.speed * std::cos(o.heading) * dt;
  o.y += o.speed * std::sin(o.heading) * dt;
  o.heading = normalize_yaw(o.heading + o.turn_rate * dt);
  // bounce off the walls to keep the population in range
  if (o.x > extent) {
    o.x = 2 * extent - o.x;
    o.heading = normalize_yaw(M_PI - o.heading);
  } else if (o.x < -extent) {
    o.x = -2 * extent - o.x;
    o.heading = normalize_yaw(M_PI - o.heading);
  }
  if (o.y > extent) {
    o.y = 2 * extent - o.y;
    o.heading = normalize_yaw(-o.heading);
  } else if (o.y < -extent) {
    o.y = -2 * extent - o.y;
    o.heading = normalize_yaw(-o.heading);
  }
}

}  // namespace

FrameSequence generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  std::vector<SimObject> objects;
  std::int64_t next_id = 0;
  {
    std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
    const int n0 = count(rng);
    for (int i = 0; i < n0; ++i) objects.push_back(spawn_object(rng, cfg, next_id++));
  }

  // smooth ego drift: fixed speed and yaw rate drawn once per scene
  std::uniform_real_distribution<double> esp(0.0, cfg.ego_speed);
  std::uniform_real_distribution<double> eyr(-0.05, 0.05);
  const double ego_v = esp(rng);
  const double ego_w = eyr(rng);
  double ego_x = 0, ego_y = 0, ego_h = 0;

  FrameSequence seq;
  seq.id = "synth-" + std::to_string(cfg.seed);
  std::bernoulli_distribution spawn_draw(cfg.spawn_prob);
  std::bernoulli_distribution despawn_draw(cfg.despawn_prob);

  for (int f = 0; f < cfg.frame_count; ++f) {
    Frame frame;
    frame.frame_idx = f;
    frame.timestamp_us = static_cast<std::int64_t>(std::llround(f * cfg.frame_period * 1e6));
    frame.ego_pose = RigidTransform::planar(ego_h, ego_x, ego_y);

    const RigidTransform inv = frame.ego_pose.inverse();
    for (const SimObject& o : objects) {
      GroundTruthObject g;
      const auto c = inv.apply_point({o.x, o.y, o.size[2] * 0.5});
      g.box.center = c;
      g.box.size = o.size;
      g.box.yaw = normalize_yaw(o.heading - ego_h);
      g.class_id = o.class_id;
      g.instance_id = o.id;
      frame.ground_truth.push_back(g);
    }
    seq.frames.push_back(std::move(frame));
    if (f + 1 == cfg.frame_count) break;

    for (SimObject& o : objects) advance_object(o, cfg.frame_period, cfg.extent);
    if (cfg.despawn_prob > 0.0) {
      std::vector<SimObject> kept;
      kept.reserve(objects.size());
      for (SimObject& o : objects)
        if (!despawn_draw(rng)) kept.push_back(o);
      objects = std::move(kept);
    }
    if (cfg.spawn_prob > 0.0 && spawn_draw(rng))
      objects.push_back(spawn_object(rng, cfg, next_id++));

    ego_x += ego_v * std::cos(ego_h) * cfg.frame_period;
    ego_y += ego_v * std::sin(ego_h) * cfg.frame_period;
    ego_h = normalize_yaw(ego_h + ego_w * cfg.frame_period);
  }
  seq.validate();
  return seq;
}

std::vector<std::vector<Detection>> simulate_detector(const FrameSequence& sequence,
                                                      const DetectorNoise& noise,
                                                      std::uint64_t seed) {
  noise.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(noise.drop_prob);
  std::bernoulli_distribution flip(noise.orientation_flip_prob);

  std::vector<std::vector<Detection>> out;
  out.reserve(sequence.frames.size());
  for (const Frame& frame : sequence.frames) {
    std::vector<Detection> dets;
    for (const GroundTruthObject& g : frame.ground_truth) {
      if (g.is_null) continue;
      if (drop(rng)) continue;
      Detection d;
      d.box = g.box;
      for (int a = 0; a < 3; ++a) d.box.center[a] += draw_normal(rng, noise.sigma_pos);
      for (int a = 0; a < 3; ++a)
        d.box.size[a] = std::max(0.1, d.box.size[a] + draw_normal(rng, noise.sigma_size));
      d.box.yaw += draw_normal(rng, noise.sigma_yaw);
      if (flip(rng)) d.box.yaw += M_PI;
      d.box.yaw = normalize_yaw(d.box.yaw);
      d.class_id = g.class_id;
      d.score = draw_score(rng, noise.tp_score_alpha, noise.tp_score_beta);
      dets.push_back(d);
    }
    if (noise.fp_rate > 0.0) {
      std::poisson_distribution<int> fp_count(noise.fp_rate);
      const int nfp = fp_count(rng);
      const auto& specs = class_specs();
      for (int i = 0; i < nfp; ++i) {
        Detection d;
        d.class_id = static_cast<int>(rng() % specs.size());
        const ClassSpec& spec = specs[static_cast<std::size_t>(d.class_id)];
        std::uniform_real_distribution<double> jitter(0.9, 1.1);
        d.box.size = {spec.w * jitter(rng), spec.l * jitter(rng), spec.h * jitter(rng)};
        std::uniform_real_distribution<double> place(-noise.fp_extent, noise.fp_extent);
        d.box.center = {place(rng), place(rng), d.box.size[2] * 0.5};
        std::uniform_real_distribution<double> dir(-M_PI, M_PI);
        d.box.yaw = dir(rng);
        d.score = draw_score(rng, noise.fp_score_alpha, noise.fp_score_beta);
        dets.push_back(d);
      }
    }
    out.push_back(std::move(dets));
  }
  return out;
}

pc::PointCloud sample_box_points(const Frame& frame, const PointSampling& sampling,
                                 std::uint64_t seed) {
  sampling.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  pc::PointCloud cloud;
  cloud.timestamp_us = frame.timestamp_us;

  if (sampling.points_per_object > 0) {
    for (const GroundTruthObject& g : frame.ground_truth) {
      if (g.is_null) continue;
      const double cx = g.box.center[0], cy = g.box.center[1], cz = g.box.center[2];
      const double hw = g.box.size[0] * 0.5, hl = g.box.size[1] * 0.5, hh = g.box.size[2] * 0.5;
      const double cs = std::cos(g.box.yaw), sn = std::sin(g.box.yaw);
      // local axes: u along the length, v along the width
      const double ux = cs, uy = sn, vx = -sn, vy = cs;

      int count = sampling.points_per_object;
      if (sampling.inverse_square) {
        const double r = std::max(std::hypot(cx, cy), sampling.reference_distance);
        const double scale = (sampling.reference_distance / r) * (sampling.reference_distance / r);
        count = std::max(1, static_cast<int>(std::llround(sampling.points_per_object * scale)));
      }

      // face: offset dir, two in-face axes with half extents, outward normal
      struct Face {
        double nx, ny, nz;  // outward normal
        double area;
      };
      const Face faces[6] = {
          {ux, uy, 0, g.box.size[0] * g.box.size[2]},   // +u (front)
          {-ux, -uy, 0, g.box.size[0] * g.box.size[2]}, // -u
          {vx, vy, 0, g.box.size[1] * g.box.size[2]},   // +v (left)
          {-vx, -vy, 0, g.box.size[1] * g.box.size[2]}, // -v
          {0, 0, 1, g.box.size[0] * g.box.size[1]},     // top
          {0, 0, -1, g.box.size[0] * g.box.size[1]},    // bottom
      };
      double weights[6];
      double total = 0.0;
      for (int fi = 0; fi < 6; ++fi) {
        const Face& fc = faces[fi];
        const bool visible = fc.nx * (0 - cx) + fc.ny * (0 - cy) + fc.nz * (0 - cz) > 0.0;
        weights[fi] = visible ? fc.area : 0.0;
        total += weights[fi];
      }
      if (total <= 0.0)  // ego inside the box: fall back to all faces
        for (int fi = 0; fi < 6; ++fi) total += (weights[fi] = faces[fi].area);

      for (int p = 0; p < count; ++p) {
        double pick = unit(rng) * total;
        int fi = 0;
        while (fi < 5 && pick > weights[fi]) {
          pick -= weights[fi];
          ++fi;
        }
        const double a = unit(rng) * 2.0 - 1.0;  // in-face coordinates
        const double b = unit(rng) * 2.0 - 1.0;
        double lu, lv, lz;  // local box coords in [-1,1] scaled by half extents
        if (fi < 2) {       // +-u faces: spans v and z
          lu = fi == 0 ? 1.0 : -1.0;
          lv = a;
          lz = b;
        } else if (fi < 4) {  // +-v faces: spans u and z
          lv = fi == 2 ? 1.0 : -1.0;
          lu = a;
          lz = b;
        } else {  // top/bottom: spans u and v
          lz = fi == 4 ? 1.0 : -1.0;
          lu = a;
          lv = b;
        }
        pc::PointXYZI pt;
        pt.x = cx + lu * hl * ux + lv * hw * vx;
        pt.y = cy + lu * hl * uy + lv * hw * vy;
        pt.z = cz + lz * hh;
        pt.intensity = unit(rng);
        cloud.points.push_back(pt);
      }
    }
  }

  for (int p = 0; p < sampling.ground_points; ++p) {
    pc::PointXYZI pt;
    pt.x = (unit(rng) * 2.0 - 1.0) * sampling.ground_extent;
    pt.y = (unit(rng) * 2.0 - 1.0) * sampling.ground_extent;
    pt.z = (unit(rng) * 2.0 - 1.0) * sampling.ground_band;
    pt.intensity = unit(rng);
    cloud.points.push_back(pt);
  }
  return cloud;
}

pc::PointCloud sample_box_points(const Frame& frame, int points_per_object, int ground_points,
                                 std::uint64_t seed) {
  PointSampling s;
  s.points_per_object = points_per_object;
  s.ground_points = ground_points;
  return sample_box_points(frame, s, seed);
}

}  // namespace lmot::synth
