// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lmot/core/types.hpp"

namespace lmot::metrics {

struct EvalConfig {
  double match_distance = 2.0;  // meters, BEV center distance
  int recall_steps = 40;
  bool per_class = false;

  void validate() const;
};

// One scored prediction in one frame; id is the track id (ignored by mAP).
struct EvalBox {
  BBox3D box;
  std::int64_t id = -1;
  int class_id = 0;
  double score = 1.0;
};

struct EvalFrame {
  std::vector<EvalBox> preds;
  std::vector<GroundTruthObject> gts;
};
using EvalSequence = std::vector<EvalFrame>;

struct FrameMatchResult {
  std::vector<std::tuple<int, int, double>> tp;  // (pred idx, gt idx, distance)
  std::vector<int> fp;                           // unmatched pred indices
  std::vector<int> fn;                           // unmatched gt indices
};

// Hungarian within the gate, preferring each gt's previously bound track id
// via a fixed epsilon cost bonus. Updates id_map with this frame's bindings.
FrameMatchResult match_frame(const std::vector<EvalBox>& preds,
                             const std::vector<GroundTruthObject>& gts, const EvalConfig& config,
                             std::map<std::int64_t, std::int64_t>& id_map);

inline constexpr double kPersistenceBonus = 1e-6;

// Per-sequence CLEAR-MOT accumulation; feed frames in order.
class EvalAccumulator {
 public:
  struct GtRecord {
    int frames_present = 0;
    int frames_tracked = 0;
    std::int64_t last_track_id = -1;
    bool gap_open = false;  // inside a present-but-untracked stretch
  };

  void add_frame(const std::vector<EvalBox>& preds, const std::vector<GroundTruthObject>& gts,
                 const EvalConfig& config);

  std::int64_t tp = 0, fp = 0, fn = 0, ids = 0, frag = 0, gt_total = 0;
  double matched_distance_sum = 0.0;
  std::map<std::int64_t, GtRecord> per_gt;  // keyed by gt instance id

 private:
  std::map<std::int64_t, std::int64_t> id_map_;
};

struct ClearMotResult {
  std::optional<double> mota;  // null when no ground truth
  std::optional<double> motp;  // mean matched distance (m); null when no TP
  std::int64_t tp = 0, fp = 0, fn = 0, ids = 0, frag = 0, gt_total = 0;
  int mt = 0, ml = 0, pt = 0, gt_tracks = 0;
};

ClearMotResult compute_clearmot(const std::vector<EvalAccumulator>& per_sequence);
ClearMotResult compute_clearmot(const EvalAccumulator& acc);

struct RecallPoint {
  double target = 0.0;
  double achieved = 0.0;
  double threshold = 0.0;
  double motar = 0.0;
  double motp = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0, ids = 0;
};

struct AmotaResult {
  std::optional<double> amota;
  std::optional<double> amotp;
  std::vector<RecallPoint> points;
  std::map<int, double> class_amota;  // populated when per_class
  std::map<int, double> class_amotp;
  std::string diagnostic;  // reason when amota is null
};

// Recall-swept tracking metrics. Each sequence carries its own id space.
AmotaResult compute_amota_amotp(const std::vector<EvalSequence>& sequences,
                                const EvalConfig& config);

struct ApEntry {
  int class_id = 0;
  double threshold = 0.0;
  double ap = 0.0;
  std::int64_t gt_count = 0;
};

struct MapResult {
  std::optional<double> map;  // null when no class has ground truth
  std::vector<ApEntry> entries;
};

inline const std::vector<double> kMapThresholds{0.5, 1.0, 2.0, 4.0};

// Detection mAP on BEV center distance: score-ranked greedy matching per
// class and threshold, all-point average precision.
MapResult compute_map_center_distance(const std::vector<EvalFrame>& frames,
                                      const std::vector<double>& thresholds = kMapThresholds);

}  // namespace lmot::metrics
