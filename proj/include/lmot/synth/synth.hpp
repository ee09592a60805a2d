// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/pc/pointcloud.hpp"

namespace lmot::synth {

struct SceneConfig {
  int frame_count = 20;
  double frame_period = 0.5;  // seconds
  int min_objects = 3;        // initial population range
  int max_objects = 8;
  double spawn_prob = 0.0;    // chance of one new object per frame
  double despawn_prob = 0.0;  // per object per frame
  double min_speed = 0.5;     // m/s, scaled down for small classes
  double max_speed = 6.0;
  double extent = 30.0;       // objects bounce off +-extent in world x/y
  double ego_speed = 1.0;     // upper bound of the smooth ego drift
  std::uint64_t seed = 0;

  void validate() const;
};

// Canonical geometry and kinematics per class id of the default ClassTable.
struct ClassSpec {
  double w, l, h;
  bool turning;        // constant turn-rate instead of constant velocity
  double speed_scale;  // applied to the configured speed range
};
const std::vector<ClassSpec>& class_specs();

struct DetectorNoise {
  double drop_prob = 0.0;
  double fp_rate = 0.0;  // Poisson mean false boxes per frame
  double sigma_pos = 0.0;
  double sigma_size = 0.0;
  double sigma_yaw = 0.0;
  double orientation_flip_prob = 0.0;
  // Beta score models; a non-positive shape means a deterministic score 1.
  double tp_score_alpha = 0.0, tp_score_beta = 0.0;
  double fp_score_alpha = 0.0, fp_score_beta = 0.0;
  double fp_extent = 30.0;  // false boxes placed uniformly within this range

  void validate() const;
  // The failure modes the smoother is meant to fix, at plausible rates.
  static DetectorNoise typical();
};

struct PointSampling {
  int points_per_object = 64;
  int ground_points = 128;
  bool inverse_square = false;      // fewer points on farther objects
  double reference_distance = 10.0; // full budget at or inside this range
  double ground_extent = 30.0;
  double ground_band = 0.05;        // clutter |z| stays within this band

  void validate() const;
};

// Ground-truth scene: objects spawn with class-dependent sizes, follow their
// motion model, and despawn stochastically; ego drifts smoothly; all outputs
// are deterministic functions of the seed. Detections are left empty.
FrameSequence generate_scene(const SceneConfig& config);

// Noisy detector emulation over a ground-truth sequence: drops, Gaussian
// perturbations, orientation flips, Poisson clutter, Beta-model scores.
std::vector<std::vector<Detection>> simulate_detector(const FrameSequence& sequence,
                                                      const DetectorNoise& noise,
                                                      std::uint64_t seed);

// Points sampled uniformly on each box's ego-facing faces plus ground
// clutter, in the frame's ego coordinates.
pc::PointCloud sample_box_points(const Frame& frame, const PointSampling& sampling,
                                 std::uint64_t seed);
pc::PointCloud sample_box_points(const Frame& frame, int points_per_object, int ground_points,
                                 std::uint64_t seed);

}  // namespace lmot::synth
