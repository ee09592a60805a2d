// SPDX-License-Identifier: Apache-2.0
#include "lmot/model/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmot/common.hpp"

namespace lmot::model {

using nn::Tensor;

void SmootherParams::validate() const {
  if (k < 0) throw ValidationError("SmootherParams: k must be non-negative");
  if (d < 8) throw ValidationError("SmootherParams: d must be at least 8");
  if (heads < 1 || d % heads != 0)
    throw ValidationError("SmootherParams: d must divide evenly into heads");
  if (encoder_layers < 1 || decoder_layers < 1)
    throw ValidationError("SmootherParams: need at least one encoder and decoder layer");
  if (L < 0) throw ValidationError("SmootherParams: L must be non-negative");
  if (score_threshold < 0.0 || score_threshold > 1.0)
    throw ValidationError("SmootherParams: score_threshold outside [0,1]");
}

std::size_t WindowEmbedding::unmasked_count() const {
  std::size_t n = 0;
  for (char m : padding_mask)
    if (!m) ++n;
  return n;
}

Smoother::Smoother(nn::ParameterStore& ps, SmootherParams params, ClassTable classes,
                   SceneRange range)
    : params_(params), classes_(std::move(classes)), range_(range) {
  params_.validate();
  const int d = params_.d;
  const int h = params_.hidden();

  input_proj_ = nn::Linear(ps, "smoother.input", 8, d);
  class_embed_ = nn::Embedding(ps, "smoother.class_embed", static_cast<Eigen::Index>(classes_.size()), d);
  frame_embed_ = nn::Embedding(ps, "smoother.frame_embed", 2 * params_.k + 1, d);

  nn::AttentionConfig acfg{d, params_.heads};
  for (int l = 0; l < params_.encoder_layers; ++l) {
    const std::string p = "smoother.enc" + std::to_string(l);
    encoder_.push_back({nn::MultiHeadAttention(ps, p + ".attn", acfg), nn::LayerNorm(ps, p + ".ln1", d),
                        nn::LayerNorm(ps, p + ".ln2", d), nn::FFN(ps, p + ".ffn", d, h, d)});
  }
  objectness_head_ = nn::Linear(ps, "smoother.objectness", d, 1);
  q1_ = nn::Linear(ps, "smoother.q1", d, d);
  q2_ = nn::Linear(ps, "smoother.q2", d, d);
  pos_ffn_ = nn::FFN(ps, "smoother.pos_ffn", d, h, d);
  for (int l = 0; l < params_.decoder_layers; ++l) {
    const std::string p = "smoother.dec" + std::to_string(l);
    decoder_.push_back({nn::MultiHeadAttention(ps, p + ".self", acfg),
                        nn::MultiHeadAttention(ps, p + ".cross", acfg),
                        nn::LayerNorm(ps, p + ".ln1", d), nn::LayerNorm(ps, p + ".ln2", d),
                        nn::LayerNorm(ps, p + ".ln3", d), nn::FFN(ps, p + ".ffn", d, h, d)});
  }
  box_head_ = nn::Linear(ps, "smoother.box_head", d, 8);
  class_head_ = nn::Linear(ps, "smoother.class_head", d, static_cast<Eigen::Index>(classes_.size()));
  score_head_ = nn::Linear(ps, "smoother.score_head", d, 1);
}

Eigen::MatrixXd Smoother::padded_pe(const Eigen::MatrixXd& centers) const {
  return padded_sinusoidal_pe(centers, params_.d, range_);
}

WindowEmbedding Smoother::embed_detections(const DetectionWindow& window) const {
  if (static_cast<int>(window.slot_count()) != 2 * params_.k + 1)
    throw ValidationError("smoother: window size does not match configured k");
  const std::size_t n = window.total_detections();
  if (n == 0) throw ValidationError("smoother: window has no detections");

  Eigen::MatrixXd feats(static_cast<Eigen::Index>(n), 8);
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(n), 3);
  std::vector<Eigen::Index> class_ids, slots;
  class_ids.reserve(n);
  slots.reserve(n);

  WindowEmbedding emb;
  emb.token_origin.reserve(n);
  emb.source.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < window.slot_count(); ++s) {
    const auto& [frame_idx, dets] = window.frames[s];
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const Detection& det = dets[i];
      det.validate(classes_);
      feats.row(row) << det.box.center[0], det.box.center[1], det.box.center[2], det.box.size[0],
          det.box.size[1], det.box.size[2], det.box.yaw, det.score;
      centers.row(row) << det.box.center[0], det.box.center[1], det.box.center[2];
      class_ids.push_back(det.class_id);
      slots.push_back(static_cast<Eigen::Index>(s));
      emb.token_origin.emplace_back(frame_idx, static_cast<int>(i));
      emb.source.push_back(det);
      ++row;
    }
  }

  Tensor tok = input_proj_.forward(Tensor::constant(std::move(feats)));
  tok = nn::add(tok, class_embed_.forward(class_ids));
  tok = nn::add(tok, frame_embed_.forward(slots));
  tok = nn::add(tok, Tensor::constant(padded_pe(centers)));
  emb.tokens = tok;
  emb.padding_mask.assign(n, 0);
  return emb;
}

WindowEmbedding Smoother::encode(WindowEmbedding emb) const {
  const Eigen::Index n = emb.tokens.rows();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
  bool any_masked = false;
  for (std::size_t j = 0; j < emb.padding_mask.size(); ++j)
    if (emb.padding_mask[j]) {
      mask.col(static_cast<Eigen::Index>(j)).setConstant(nn::kMaskValue);
      any_masked = true;
    }

  Tensor x = emb.tokens;
  for (const auto& layer : encoder_) {
    Tensor a = layer.attn.forward(x, x, x, any_masked ? &mask : nullptr);
    x = layer.ln1.forward(nn::add(x, a));
    x = layer.ln2.forward(nn::add(x, layer.ffn.forward(x)));
  }
  emb.tokens = x;
  return emb;
}

std::pair<std::vector<Eigen::Index>, Tensor> Smoother::topk_select(
    const WindowEmbedding& encoded, int L) const {
  Tensor obj = nn::sigmoid(objectness_head_.forward(encoded.tokens));  // N x 1
  const auto& vals = obj.value();

  std::vector<Eigen::Index> order;
  order.reserve(static_cast<std::size_t>(vals.rows()));
  for (Eigen::Index i = 0; i < vals.rows(); ++i)
    if (!encoded.padding_mask[static_cast<std::size_t>(i)]) order.push_back(i);
  if (L > static_cast<int>(order.size())) L = static_cast<int>(order.size());

  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return vals(a, 0) > vals(b, 0);  // stable: equal scores keep lower index first
  });
  order.resize(static_cast<std::size_t>(L));
  std::sort(order.begin(), order.end());
  return {order, obj};
}

std::pair<Tensor, Tensor> Smoother::build_queries(const WindowEmbedding& encoded,
                                                  const std::vector<Eigen::Index>& idx) const {
  Tensor sel = nn::gather_rows(encoded.tokens, idx);
  Tensor q = nn::relu(q2_.forward(nn::relu(q1_.forward(sel))));

  Eigen::MatrixXd centers(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& c = encoded.source[static_cast<std::size_t>(idx[i])].box.center;
    centers.row(static_cast<Eigen::Index>(i)) << c[0], c[1], c[2];
  }
  Tensor p = pos_ffn_.forward(Tensor::constant(padded_pe(centers)));
  return {q, p};
}

Tensor Smoother::decode(const Tensor& q, const Tensor& p, const WindowEmbedding& encoded) const {
  Tensor x = nn::add(q, p);
  const Eigen::Index n = encoded.tokens.rows();
  Eigen::MatrixXd cross_mask = Eigen::MatrixXd::Zero(x.rows(), n);
  bool any_masked = false;
  for (std::size_t j = 0; j < encoded.padding_mask.size(); ++j)
    if (encoded.padding_mask[j]) {
      cross_mask.col(static_cast<Eigen::Index>(j)).setConstant(nn::kMaskValue);
      any_masked = true;
    }

  for (const auto& layer : decoder_) {
    Tensor a = layer.self_attn.forward(x, x, x);
    x = layer.ln1.forward(nn::add(x, a));
    Tensor c = layer.cross_attn.forward(x, encoded.tokens, encoded.tokens,
                                        any_masked ? &cross_mask : nullptr);
    x = layer.ln2.forward(nn::add(x, c));
    x = layer.ln3.forward(nn::add(x, layer.ffn.forward(x)));
  }
  return x;
}

int Smoother::resolve_L(std::size_t key_frame_count, std::size_t available_tokens) const {
  int L = params_.L;
  if (L == 0) {
    L = static_cast<int>(std::ceil(1.25 * static_cast<double>(key_frame_count)));
    L = std::clamp(L, 8, 128);
  }
  return std::min(L, static_cast<int>(available_tokens));
}

Smoother::Outputs Smoother::forward(const DetectionWindow& window) const {
  WindowEmbedding enc = encode(embed_detections(window));
  const std::size_t n_key = window.frames[window.key_slot()].second.size();
  const int L = resolve_L(n_key, enc.unmasked_count());

  auto [idx, objectness] = topk_select(enc, L);
  auto [q, p] = build_queries(enc, idx);
  Tensor x = decode(q, p, enc);

  Outputs out;
  out.selected = idx;
  out.objectness = objectness;

  out.box7 = box_from_head(box_head_.forward(x), range_);

  out.class_logits = class_head_.forward(x);
  out.class_probs = nn::softmax_rows(out.class_logits);
  Tensor sel_obj = nn::gather_rows(objectness, idx);
  out.score = nn::mul(nn::sigmoid(score_head_.forward(x)), sel_obj);
  return out;
}

std::vector<Detection> Smoother::smooth_frame(const DetectionWindow& window) const {
  Outputs out = forward(window);
  const auto& box = out.box7.value();
  const auto& probs = out.class_probs.value();
  const auto& score = out.score.value();

  std::vector<Detection> dets;
  for (Eigen::Index i = 0; i < box.rows(); ++i) {
    const double s = score(i, 0);
    if (s < params_.score_threshold) continue;
    Detection d;
    d.box.center = {box(i, 0), box(i, 1), box(i, 2)};
    d.box.size = {box(i, 3), box(i, 4), box(i, 5)};
    d.box.yaw = normalize_yaw(box(i, 6));
    Eigen::Index cls;
    probs.row(i).maxCoeff(&cls);
    d.class_id = static_cast<int>(cls);
    d.score = s;
    d.validate(classes_);
    dets.push_back(d);
  }
  return dets;
}

}  // namespace lmot::model
