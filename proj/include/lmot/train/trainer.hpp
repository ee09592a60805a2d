// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/core/window.hpp"
#include "lmot/match/losses.hpp"
#include "lmot/model/smoother.hpp"
#include "lmot/model/tracker.hpp"
#include "lmot/pc/voxels.hpp"

namespace lmot::train {

// Gaussian augmentation magnitudes applied to detection boxes.
struct NoiseSigmas {
  double sigma_pos = 0.3;
  double sigma_size = 0.1;
  double sigma_yaw = 0.1;

  void validate() const;
  bool enabled() const { return sigma_pos > 0.0 || sigma_size > 0.0 || sigma_yaw > 0.0; }
};

enum class Stage { kSmoother, kTracker };

struct TrainConfig {
  Stage stage = Stage::kSmoother;
  int epochs = 200;
  double learning_rate = 5e-4;  // tracker default: 4e-4
  int batch_size = 1;           // samples (windows or clips) per optimizer step
  match::MatchWeights weights = match::MatchWeights::smoother_defaults();
  NoiseSigmas noise;
  std::uint64_t seed = 0;
  int sequence_clip_length = 8;    // tracker unroll length
  bool finetune_smoother = false;  // tracker stage: alternate smoother updates
  double weight_decay = 0.01;

  void validate() const;
};

// Zero-mean Gaussian noise on center / size / yaw. Sizes are clamped at
// 0.05 m, yaw renormalized; scores and classes pass through untouched.
std::vector<Detection> perturb_boxes(const std::vector<Detection>& dets,
                                     const NoiseSigmas& noise, std::mt19937_64& rng);

// Differentiable matched loss of one frame. The assignment runs on detached
// values through the shared Hungarian kernel; the returned scalar rebuilds
// the matched cost (box L1, focal, optional GIoU) from live graph tensors.
struct FrameLoss {
  nn::Tensor loss;  // 1x1
  double bbox = 0.0, cls = 0.0, giou = 0.0;  // detached components
  std::vector<int> target_of;  // per query: gt index or -1 for null
};

FrameLoss smoother_frame_loss(const model::Smoother::Outputs& out,
                              const std::vector<GroundTruthObject>& gts,
                              const match::MatchWeights& weights, std::size_t n_classes);

// Tracker loss with persistent identities: a query bound to instance g keeps
// gt g while it exists; unbound and orphaned queries enter a Hungarian round
// against unclaimed gts; leftovers get null targets. bindings aligns with
// decoded rows (-1 = unbound). Two queries bound to one instance -> error.
struct TrackerFrameLoss {
  nn::Tensor loss;
  double bbox = 0.0, cls = 0.0, giou = 0.0;
  std::vector<int> target_of;
  std::vector<std::int64_t> bindings_out;  // instance per query, -1 unbound
};

TrackerFrameLoss tracker_frame_loss(const model::Tracker::Decoded& decoded,
                                    const std::vector<GroundTruthObject>& gts,
                                    const std::vector<std::int64_t>& bindings,
                                    const match::MatchWeights& weights,
                                    std::size_t n_classes);

// ---- datasets ----

struct SmootherSample {
  DetectionWindow window;  // assembled and ego-compensated
  std::vector<GroundTruthObject> gts;  // key-frame ground truth
};
using SmootherDataset = std::vector<SmootherSample>;

// One window per key frame, detections injected from `dets` (one list per
// frame, ego frame of that frame), motion-compensated into key-frame coords.
SmootherDataset build_smoother_dataset(const FrameSequence& seq,
                                       const std::vector<std::vector<Detection>>& dets,
                                       int k, WindowMode mode);

struct TrackerClip {
  std::vector<std::vector<Detection>> smoothed;     // per frame
  std::vector<std::vector<GroundTruthObject>> gts;  // per frame, instance ids set
  std::vector<pc::StackedCloud> clouds;             // empty, or one per frame
};

// Non-overlapping clips of at most clip_length frames covering the sequence.
std::vector<TrackerClip> build_tracker_clips(const FrameSequence& seq,
                                             const std::vector<std::vector<Detection>>& smoothed,
                                             int clip_length,
                                             const std::vector<pc::StackedCloud>* clouds = nullptr);

// ---- training loops ----

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean per sample (window or clip)
  double bbox = 0.0, cls = 0.0, giou = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// AdamW over the store's parameters; per-epoch mean loss recorded.
// Augmentation noise is redrawn every epoch from the config seed. Throws
// NumericError naming epoch and sample on a non-finite loss.
TrainResult train_smoother(model::Smoother& model, nn::ParameterStore& ps,
                           const SmootherDataset& data, const TrainConfig& cfg);

// Unrolls the tracker over each clip, carrying query features and decoded
// boxes through the graph (backprop through time). The optional voxel
// encoder turns clip clouds into attention context in-graph.
TrainResult train_tracker(model::Tracker& tracker, nn::ParameterStore& ps,
                          const std::vector<TrackerClip>& clips, const TrainConfig& cfg,
                          const pc::VoxelEncoder* voxels = nullptr,
                          const pc::VoxelGridSpec& grid = pc::VoxelGridSpec{});

}  // namespace lmot::train
