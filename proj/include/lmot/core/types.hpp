// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "lmot/common.hpp"
#include "lmot/core/pose.hpp"

namespace lmot {

// Wraps an angle into (-pi, pi]. Throws ValidationError on non-finite input.
double normalize_yaw(double angle);

// Table of known object classes. Class ids are indices into the name list.
class ClassTable {
 public:
  ClassTable();  // default: the 7 nuScenes tracking classes
  explicit ClassTable(std::vector<std::string> names);

  int id_of(const std::string& name) const;  // throws ValidationError if unknown
  const std::string& name_of(int id) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

// Axis-aligned spatial extent boxes and positional encodings are normalized
// against. Shared by the regression heads, the sinusoidal encoding and the
// synthetic generator.
struct SceneRange {
  std::array<double, 3> min{-48.0, -48.0, -4.0};
  std::array<double, 3> max{48.0, 48.0, 4.0};

  double span(int axis) const { return max[axis] - min[axis]; }
};

// 7-DoF oriented box. size = (w, l, h) with the length l along the heading
// axis (yaw measured from +x). yaw is kept in (-pi, pi].
struct BBox3D {
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> size{1, 1, 1};
  double yaw = 0.0;

  void validate() const;  // finite fields, positive size; throws ValidationError
};

struct Detection {
  BBox3D box;
  int class_id = 0;
  double score = 1.0;

  void validate(const ClassTable& classes) const;
};

struct GroundTruthObject {
  BBox3D box;
  int class_id = 0;
  std::int64_t instance_id = -1;
  bool is_null = false;

  static GroundTruthObject null_object();
};

enum class TrackStatus { kActive, kInactive, kTerminated };

struct TrackHistoryEntry {
  int frame_idx = 0;
  BBox3D box;
  double score = 0.0;
};

// Persistent track identity. query_feature is the carried d-dimensional
// track query; history holds the most recent emissions, bounded by the
// tracker's history capacity.
struct TrackState {
  std::int64_t track_id = -1;
  BBox3D box;
  double score = 0.0;
  int class_id = 0;
  std::vector<double> query_feature;
  std::deque<TrackHistoryEntry> history;
  int inactive_frames = 0;
  TrackStatus status = TrackStatus::kActive;
};

// One frame of a sequence. Detections and ground truth are expressed in this
// frame's ego coordinates; ego_pose maps ego -> world.
struct Frame {
  int frame_idx = 0;
  std::int64_t timestamp_us = 0;
  RigidTransform ego_pose;
  std::vector<Detection> detections;
  std::vector<GroundTruthObject> ground_truth;
  std::string cloud_path;  // optional point-cloud reference
};

struct FrameSequence {
  std::string id;
  std::vector<Frame> frames;

  std::size_t length() const { return frames.size(); }
  // Strictly increasing timestamps, rigid poses, contiguous frame indices.
  void validate() const;
};

}  // namespace lmot
