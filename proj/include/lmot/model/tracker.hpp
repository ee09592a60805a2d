// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/model/heads.hpp"
#include "lmot/nn/layers.hpp"
#include "lmot/pc/voxels.hpp"

namespace lmot::model {

struct TrackerParams {
  double termination_confidence = 0.2;  // tau_c: emit at or above, hide below
  int max_inactive_frames = 5;
  double birth_gate = 2.0;  // meters, BEV center distance
  int d = 64;
  int heads = 4;
  int decoder_layers = 2;
  int ffn_hidden = 0;  // 0 = 2*d
  int history_capacity = 10;

  int hidden() const { return ffn_hidden > 0 ? ffn_hidden : 2 * d; }
  void validate() const;
};

struct TrackerFrameState {
  std::vector<TrackState> tracks;  // carried queries: active + inactive
  std::int64_t next_track_id = 0;
  int frame_idx = -1;  // last processed frame; fresh state starts at -1
};

// One attention query for the current frame: a carried track or a birth
// candidate spawned from a smoothed detection no track claimed.
struct TrackQuery {
  bool is_birth = false;
  std::size_t state_index = 0;  // persistent only: index into previous state
  Detection source;  // birth: the detection; persistent: last box/score/class
};

// Stage two g: associates the smoothed detections of each frame with carried
// track queries via attention over detection features and point-cloud
// context, then decodes boxes/scores and runs the track life-cycle.
class Tracker {
 public:
  Tracker(nn::ParameterStore& ps, TrackerParams params, ClassTable classes,
          SceneRange range = SceneRange{});

  // Persistent queries (previous-frame tracks, in state order) followed by
  // one birth query per detection unmatched within birth_gate.
  std::vector<TrackQuery> propose_births(const std::vector<Detection>& smoothed,
                                         const TrackerFrameState& state) const;

  struct Encoded {
    nn::Tensor qfeat;  // Nq x d
    nn::Tensor sfeat;  // max(1, |smoothed|) x d; learned null token when empty
  };
  // carried holds the persistent queries' features, one row per leading
  // persistent query (zero rows when none). Training passes the live graph
  // tensor here so gradients flow across frames. persistent_box8 optionally
  // substitutes the persistent queries' box+score rows (np x 8) with graph
  // values so the box-encoding path stays differentiable across frames.
  Encoded encode_inputs(const std::vector<TrackQuery>& queries,
                        const std::vector<Detection>& smoothed,
                        const nn::Tensor& carried,
                        const nn::Tensor* persistent_box8 = nullptr) const;

  nn::Tensor track_attention(const nn::Tensor& qfeat, const nn::Tensor& sfeat,
                             const pc::FeatureTokens& context) const;

  struct Decoded {
    nn::Tensor box7;          // Nq x 7, absolute boxes in scene units
    nn::Tensor score;         // Nq x 1, sigmoid confidence
    nn::Tensor class_logits;  // Nq x C
    nn::Tensor class_probs;   // Nq x C, softmax rows
  };
  Decoded decode_tracks(const nn::Tensor& tfeat) const;

  // Emits queries scoring >= tau_c with stable ids (births get fresh ids on
  // first activation); hides low scorers as inactive carried queries;
  // terminates queries inactive past max_inactive_frames.
  // carried_out rows align with queries; survivors (optional out) lists the
  // query indices that remain in the new state, in state order.
  std::pair<std::vector<TrackState>, TrackerFrameState> lifecycle_update(
      const Decoded& decoded, const std::vector<TrackQuery>& queries,
      const TrackerFrameState& state, const nn::Tensor& carried_out,
      std::vector<Eigen::Index>* survivors = nullptr) const;

  struct StepResult {
    std::vector<TrackState> emitted;  // T^tau: active tracks only
    TrackerFrameState state;
    // Differentiable internals, row-aligned with queries.
    std::vector<TrackQuery> queries;
    Decoded decoded;
    nn::Tensor tfeat;        // Nq x d attention output
    nn::Tensor carried_out;  // Nq x d EMA-updated query features
    std::vector<Eigen::Index> survivors;  // query index per new-state track
  };
  // Full frame step. carried_override substitutes the persistent queries'
  // carried-feature block and box_override their box+score rows (np x 8),
  // both for training BPTT; defaults read the stored state. Override values
  // must equal the state's (they are the same decoded quantities).
  StepResult step(const std::vector<Detection>& smoothed, const TrackerFrameState& state,
                  const pc::FeatureTokens& context,
                  const nn::Tensor* carried_override = nullptr,
                  const nn::Tensor* box_override = nullptr) const;

  const TrackerParams& params() const { return params_; }
  const ClassTable& classes() const { return classes_; }
  const SceneRange& range() const { return range_; }

  // EMA weight on the previous feature when folding in a new observation.
  static constexpr double kCarryDecay = 0.8;

 private:
  struct DecoderLayer {
    nn::MultiHeadAttention self_attn, det_attn, pc_attn;
    nn::LayerNorm ln1, ln2, ln3, ln4;
    nn::FFN ffn;
  };

  // Shared box+score encoder: 8 features -> d, plus positional encoding.
  nn::Tensor encode_boxes(const std::vector<Detection>& dets) const;

  TrackerParams params_;
  ClassTable classes_;
  SceneRange range_;

  nn::FFN input_mlp_;
  nn::Tensor null_det_;  // 1 x d key/value when the frame has no detections
  nn::Tensor null_pc_;   // 1 x d key/value when there are no cloud tokens
  std::vector<DecoderLayer> decoder_;
  nn::Linear trunk_;  // decode hidden layer, shared by the three heads
  nn::Linear box_head_;
  nn::Linear score_head_;
  nn::Linear class_head_;
};

}  // namespace lmot::model
