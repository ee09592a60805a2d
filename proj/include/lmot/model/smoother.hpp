// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/core/window.hpp"
#include "lmot/model/heads.hpp"
#include "lmot/nn/layers.hpp"

namespace lmot::model {

struct SmootherParams {
  int k = 2;
  WindowMode mode = WindowMode::kOffline;
  int d = 64;
  int L = 0;  // 0 = auto: key-frame count + 25% headroom, clamped to [8, 128]
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int ffn_hidden = 0;  // 0 = 2*d
  double score_threshold = 0.1;

  int hidden() const { return ffn_hidden > 0 ? ffn_hidden : 2 * d; }
  void validate() const;
};

struct WindowEmbedding {
  nn::Tensor tokens;                               // N x d
  std::vector<std::pair<int, int>> token_origin;   // (frame_idx, detection_idx)
  std::vector<char> padding_mask;                  // 1 = padding, excluded everywhere
  std::vector<Detection> source;                   // raw detection per token

  std::size_t count() const { return token_origin.size(); }
  std::size_t unmasked_count() const;
};

// Stage one: refines the key frame's detections from a temporal window of
// detections via encoder -> top-k -> query decoder -> regression heads.
class Smoother {
 public:
  Smoother(nn::ParameterStore& ps, SmootherParams params, ClassTable classes,
           SceneRange range = SceneRange{});

  WindowEmbedding embed_detections(const DetectionWindow& window) const;
  WindowEmbedding encode(WindowEmbedding emb) const;
  // The L highest objectness tokens (ties to lower index) plus all-token
  // objectness as a differentiable N x 1 column.
  std::pair<std::vector<Eigen::Index>, nn::Tensor> topk_select(const WindowEmbedding& encoded,
                                                               int L) const;
  // Q per Eq-5-style double ReLU; P from the positional encoding of the raw
  // detection centers at the selected tokens.
  std::pair<nn::Tensor, nn::Tensor> build_queries(const WindowEmbedding& encoded,
                                                  const std::vector<Eigen::Index>& idx) const;
  nn::Tensor decode(const nn::Tensor& q, const nn::Tensor& p,
                    const WindowEmbedding& encoded) const;

  // Differentiable head outputs, kept for loss construction.
  struct Outputs {
    nn::Tensor box7;         // L x 7: x y z w l h yaw, in scene units
    nn::Tensor class_logits; // L x C
    nn::Tensor class_probs;  // L x C, softmax rows
    nn::Tensor score;        // L x 1, head sigmoid fused with selection objectness
    nn::Tensor objectness;   // N x 1 over all window tokens
    std::vector<Eigen::Index> selected;
  };
  Outputs forward(const DetectionWindow& window) const;

  // Emitted detections for the key frame: score >= score_threshold.
  std::vector<Detection> smooth_frame(const DetectionWindow& window) const;

  int resolve_L(std::size_t key_frame_count, std::size_t available_tokens) const;
  const SmootherParams& params() const { return params_; }
  const ClassTable& classes() const { return classes_; }
  const SceneRange& range() const { return range_; }

 private:
  struct EncoderLayer {
    nn::MultiHeadAttention attn;
    nn::LayerNorm ln1, ln2;
    nn::FFN ffn;
  };
  struct DecoderLayer {
    nn::MultiHeadAttention self_attn, cross_attn;
    nn::LayerNorm ln1, ln2, ln3;
    nn::FFN ffn;
  };

  Eigen::MatrixXd padded_pe(const Eigen::MatrixXd& centers) const;

  SmootherParams params_;
  ClassTable classes_;
  SceneRange range_;

  nn::Linear input_proj_;
  nn::Embedding class_embed_;
  nn::Embedding frame_embed_;
  std::vector<EncoderLayer> encoder_;
  nn::Linear objectness_head_;
  nn::Linear q1_, q2_;  // Eq.-5 weights
  nn::FFN pos_ffn_;
  std::vector<DecoderLayer> decoder_;
  nn::Linear box_head_;    // d -> 8 (center 3, size 3, sin, cos)
  nn::Linear class_head_;  // d -> C
  nn::Linear score_head_;  // d -> 1
};

}  // namespace lmot::model
