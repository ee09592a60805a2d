// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmot/core/types.hpp"
#include "lmot/metrics/metrics.hpp"

namespace lmot::io {

// Stamped on every JSON-lines record, report, and manifest; readers reject
// other versions.
inline constexpr int kFormatVersion = 1;

// ---- JSON-lines sequence files ----
//
// One record per frame:
//   {"boxes": [...], "ego_pose": [16 row-major doubles], "frame_index": i,
//    "sequence_id": s, "timestamp_us": t, "v": 1}
// plus an optional "cloud" path (relative to the file's directory). Boxes
// carry center/size/yaw and the class name; detection boxes add score, track
// boxes add score and track_id, ground-truth boxes carry instance_id instead
// of a score. Doubles survive a write/read round trip bit-exactly. Schema
// violations raise ValidationError prefixed with "path:line:". Yaw values
// outside (-pi, pi] are normalized on read with a warning, appended to
// `warnings` when given and printed to stderr otherwise.

std::vector<FrameSequence> read_detections(const std::string& path, const ClassTable& classes,
                                           std::vector<std::string>* warnings = nullptr);
void write_detections(const std::string& path, const std::vector<FrameSequence>& seqs,
                      const ClassTable& classes);

std::vector<FrameSequence> read_ground_truth(const std::string& path, const ClassTable& classes,
                                             std::vector<std::string>* warnings = nullptr);
void write_ground_truth(const std::string& path, const std::vector<FrameSequence>& seqs,
                        const ClassTable& classes);

// Tracker output: per-frame boxes with persistent identities.
struct TrackFrame {
  int frame_index = 0;
  std::int64_t timestamp_us = 0;
  RigidTransform ego_pose;
  std::string cloud_path;
  std::vector<metrics::EvalBox> boxes;
};

struct TrackSequence {
  std::string id;
  std::vector<TrackFrame> frames;
};

// Duplicate (frame, track_id) pairs are rejected.
std::vector<TrackSequence> read_tracks(const std::string& path, const ClassTable& classes,
                                       std::vector<std::string>* warnings = nullptr);
void write_tracks(const std::string& path, const std::vector<TrackSequence>& seqs,
                  const ClassTable& classes);

// ---- run manifest ----

// Artifact index written next to a command's outputs: what went in, what
// came out, and the fully resolved configuration, seed included.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::vector<std::string> input_paths;       // consumed files
  std::vector<std::string> output_paths;      // produced files
  std::vector<std::string> checkpoint_paths;  // model weights read or written
  nlohmann::json stage_configs;               // resolved per-module configuration
};

// Paths are interpreted relative to the manifest's directory; read_manifest
// verifies that every referenced file exists.
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

// ---- metric reports ----

nlohmann::json to_json(const metrics::ClearMotResult& r);
nlohmann::json to_json(const metrics::AmotaResult& r, const ClassTable& classes);
nlohmann::json to_json(const metrics::MapResult& r, const ClassTable& classes);

// Sorted keys, two-space indent, trailing newline: byte-identical output for
// equal content. path "-" writes to stdout.
void write_report(const std::string& path, const nlohmann::json& report);

}  // namespace lmot::io
