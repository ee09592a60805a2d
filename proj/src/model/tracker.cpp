// SPDX-License-Identifier: Apache-2.0
#include "lmot/model/tracker.hpp"

#include <algorithm>
#include <string>

#include "lmot/common.hpp"
#include "lmot/geom/geometry.hpp"
#include "lmot/match/hungarian.hpp"

namespace lmot::model {

using nn::Tensor;

namespace {
// Stand-in cost for beyond-gate pairs: large enough that the assignment
// maximizes the number of in-gate matches before minimizing distance.
constexpr double kUnmatchable = 1e6;
}  // namespace

void TrackerParams::validate() const {
  if (!(termination_confidence > 0.0 && termination_confidence < 1.0))
    throw ValidationError("TrackerParams: termination_confidence outside (0,1)");
  if (max_inactive_frames < 1)
    throw ValidationError("TrackerParams: max_inactive_frames must be at least 1");
  if (!(birth_gate > 0.0)) throw ValidationError("TrackerParams: birth_gate must be positive");
  if (d < 8) throw ValidationError("TrackerParams: d must be at least 8");
  if (heads < 1 || d % heads != 0)
    throw ValidationError("TrackerParams: d must divide evenly into heads");
  if (decoder_layers < 1) throw ValidationError("TrackerParams: need at least one decoder layer");
  if (history_capacity < 1)
    throw ValidationError("TrackerParams: history_capacity must be at least 1");
}

Tracker::Tracker(nn::ParameterStore& ps, TrackerParams params, ClassTable classes,
                 SceneRange range)
    : params_(params), classes_(std::move(classes)), range_(range) {
  params_.validate();
  const int d = params_.d;
  const int h = params_.hidden();

  input_mlp_ = nn::FFN(ps, "tracker.input", 8, d, d);
  null_det_ = ps.create("tracker.null_det", 1, d);
  null_pc_ = ps.create("tracker.null_pc", 1, d);

  nn::AttentionConfig acfg{d, params_.heads};
  for (int l = 0; l < params_.decoder_layers; ++l) {
    const std::string p = "tracker.dec" + std::to_string(l);
    decoder_.push_back({nn::MultiHeadAttention(ps, p + ".self", acfg),
                        nn::MultiHeadAttention(ps, p + ".det", acfg),
                        nn::MultiHeadAttention(ps, p + ".pc", acfg),
                        nn::LayerNorm(ps, p + ".ln1", d), nn::LayerNorm(ps, p + ".ln2", d),
                        nn::LayerNorm(ps, p + ".ln3", d), nn::LayerNorm(ps, p + ".ln4", d),
                        nn::FFN(ps, p + ".ffn", d, h, d)});
  }
  trunk_ = nn::Linear(ps, "tracker.trunk", d, d);
  box_head_ = nn::Linear(ps, "tracker.box_head", d, 8);
  score_head_ = nn::Linear(ps, "tracker.score_head", d, 1);
  class_head_ = nn::Linear(ps, "tracker.class_head", d, static_cast<Eigen::Index>(classes_.size()));
}

std::vector<TrackQuery> Tracker::propose_births(const std::vector<Detection>& smoothed,
                                                const TrackerFrameState& state) const {
  for (const auto& det : smoothed) det.validate(classes_);

  std::vector<char> det_matched(smoothed.size(), 0);
  if (!smoothed.empty() && !state.tracks.empty()) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(smoothed.size()),
                         static_cast<Eigen::Index>(state.tracks.size()));
    for (std::size_t i = 0; i < smoothed.size(); ++i)
      for (std::size_t j = 0; j < state.tracks.size(); ++j) {
        const double dist = geom::bev_center_distance(smoothed[i].box, state.tracks[j].box);
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            dist <= params_.birth_gate ? dist : kUnmatchable;
      }
    for (const auto& [r, c] : match::hungarian_assign(cost).pairs)
      if (cost(r, c) < kUnmatchable) det_matched[static_cast<std::size_t>(r)] = 1;
  }

  std::vector<TrackQuery> queries;
  queries.reserve(state.tracks.size() + smoothed.size());
  for (std::size_t j = 0; j < state.tracks.size(); ++j) {
    const TrackState& t = state.tracks[j];
    TrackQuery q;
    q.is_birth = false;
    q.state_index = j;
    q.source.box = t.box;
    q.source.class_id = t.class_id;
    q.source.score = t.score;
    queries.push_back(q);
  }
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    if (det_matched[i]) continue;
    TrackQuery q;
    q.is_birth = true;
    q.source = smoothed[i];
    queries.push_back(q);
  }
  return queries;
}

Tensor Tracker::encode_boxes(const std::vector<Detection>& dets) const {
  const Eigen::Index n = static_cast<Eigen::Index>(dets.size());
  Eigen::MatrixXd feats(n, 8);
  Eigen::MatrixXd centers(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Detection& d = dets[static_cast<std::size_t>(i)];
    feats.row(i) << d.box.center[0], d.box.center[1], d.box.center[2], d.box.size[0],
        d.box.size[1], d.box.size[2], d.box.yaw, d.score;
    centers.row(i) << d.box.center[0], d.box.center[1], d.box.center[2];
  }
  Tensor enc = input_mlp_.forward(Tensor::constant(std::move(feats)));
  return nn::add(enc, Tensor::constant(padded_sinusoidal_pe(centers, params_.d, range_)));
}

Tracker::Encoded Tracker::encode_inputs(const std::vector<TrackQuery>& queries,
                                        const std::vector<Detection>& smoothed,
                                        const Tensor& carried,
                                        const Tensor* persistent_box8) const {
  if (queries.empty()) throw ValidationError("tracker: encode_inputs needs at least one query");
  const Eigen::Index nq = static_cast<Eigen::Index>(queries.size());
  const Eigen::Index np = carried.defined() ? carried.rows() : 0;
  for (Eigen::Index i = 0; i < nq; ++i)
    if (queries[static_cast<std::size_t>(i)].is_birth != (i >= np))
      throw ValidationError("tracker: carried rows must cover exactly the persistent queries");
  if (np > 0 && carried.cols() != params_.d)
    throw ValidationError("tracker: carried feature width does not match d");
  if (persistent_box8 && (persistent_box8->rows() != np || persistent_box8->cols() != 8))
    throw ValidationError("tracker: persistent box features must be np x 8");

  Encoded enc;
  if (persistent_box8 && np > 0) {
    Tensor x8 = *persistent_box8;
    if (np < nq) {
      Eigen::MatrixXd births(nq - np, 8);
      for (Eigen::Index i = np; i < nq; ++i) {
        const Detection& d = queries[static_cast<std::size_t>(i)].source;
        births.row(i - np) << d.box.center[0], d.box.center[1], d.box.center[2], d.box.size[0],
            d.box.size[1], d.box.size[2], d.box.yaw, d.score;
      }
      x8 = nn::concat_rows({x8, Tensor::constant(std::move(births))});
    }
    const Tensor pe = padded_sinusoidal_pe_graph(nn::slice_cols(x8, 0, 3), params_.d, range_);
    enc.qfeat = nn::add(input_mlp_.forward(x8), pe);
  } else {
    std::vector<Detection> sources;
    sources.reserve(queries.size());
    for (const auto& q : queries) sources.push_back(q.source);
    enc.qfeat = encode_boxes(sources);
  }
  if (np > 0) {
    Tensor pad = carried;
    if (np < nq)
      pad = nn::concat_rows({carried, Tensor::constant(Eigen::MatrixXd::Zero(nq - np, params_.d))});
    enc.qfeat = nn::add(enc.qfeat, pad);
  }
  enc.sfeat = smoothed.empty() ? null_det_ : encode_boxes(smoothed);
  return enc;
}

Tensor Tracker::track_attention(const Tensor& qfeat, const Tensor& sfeat,
                                const pc::FeatureTokens& context) const {
  Tensor pc_kv = context.empty() ? null_pc_ : context.tokens;
  if (pc_kv.cols() != params_.d)
    throw ValidationError("tracker: point-cloud token width does not match d");

  Tensor x = qfeat;
  for (const auto& layer : decoder_) {
    x = layer.ln1.forward(nn::add(x, layer.self_attn.forward(x, x, x)));
    x = layer.ln2.forward(nn::add(x, layer.det_attn.forward(x, sfeat, sfeat)));
    x = layer.ln3.forward(nn::add(x, layer.pc_attn.forward(x, pc_kv, pc_kv)));
    x = layer.ln4.forward(nn::add(x, layer.ffn.forward(x)));
  }
  return x;
}

Tracker::Decoded Tracker::decode_tracks(const Tensor& tfeat) const {
  Tensor h = nn::relu(trunk_.forward(tfeat));
  Decoded out;
  out.box7 = box_from_head(box_head_.forward(h), range_);
  out.score = nn::sigmoid(score_head_.forward(h));
  out.class_logits = class_head_.forward(h);
  out.class_probs = nn::softmax_rows(out.class_logits);
  return out;
}

std::pair<std::vector<TrackState>, TrackerFrameState> Tracker::lifecycle_update(
    const Decoded& decoded, const std::vector<TrackQuery>& queries,
    const TrackerFrameState& state, const Tensor& carried_out,
    std::vector<Eigen::Index>* survivors) const {
  const Eigen::Index nq = static_cast<Eigen::Index>(queries.size());
  if (decoded.score.rows() != nq || carried_out.rows() != nq)
    throw ValidationError("tracker: lifecycle inputs not aligned with queries");

  const int frame = state.frame_idx + 1;
  TrackerFrameState next;
  next.frame_idx = frame;
  next.next_track_id = state.next_track_id;

  std::vector<TrackState> emitted;
  const auto& box = decoded.box7.value();
  const auto& score = decoded.score.value();
  const auto& probs = decoded.class_probs.value();
  const auto& carried = carried_out.value();

  for (Eigen::Index i = 0; i < nq; ++i) {
    const TrackQuery& q = queries[static_cast<std::size_t>(i)];
    TrackState t;
    if (!q.is_birth) t = state.tracks[q.state_index];

    t.box.center = {box(i, 0), box(i, 1), box(i, 2)};
    t.box.size = {box(i, 3), box(i, 4), box(i, 5)};
    t.box.yaw = normalize_yaw(box(i, 6));
    t.score = score(i, 0);
    Eigen::Index cls;
    probs.row(i).maxCoeff(&cls);
    t.class_id = static_cast<int>(cls);
    t.query_feature.assign(carried.row(i).begin(), carried.row(i).end());

    if (t.score >= params_.termination_confidence) {
      if (t.track_id < 0) t.track_id = next.next_track_id++;
      t.status = TrackStatus::kActive;
      t.inactive_frames = 0;
      t.history.push_back({frame, t.box, t.score});
      while (static_cast<int>(t.history.size()) > params_.history_capacity)
        t.history.pop_front();
      emitted.push_back(t);
    } else {
      t.status = TrackStatus::kInactive;
      ++t.inactive_frames;
      if (t.inactive_frames > params_.max_inactive_frames) continue;  // terminated
    }
    if (survivors) survivors->push_back(i);
    next.tracks.push_back(std::move(t));
  }
  return {std::move(emitted), std::move(next)};
}

Tracker::StepResult Tracker::step(const std::vector<Detection>& smoothed,
                                  const TrackerFrameState& state,
                                  const pc::FeatureTokens& context,
                                  const Tensor* carried_override, const Tensor* box_override) const {
  StepResult res;
  res.queries = propose_births(smoothed, state);
  if (res.queries.empty()) {
    res.state = state;
    ++res.state.frame_idx;
    return res;
  }

  const Eigen::Index np = static_cast<Eigen::Index>(state.tracks.size());
  Tensor carried;
  if (carried_override) {
    carried = *carried_override;
    if ((carried.defined() ? carried.rows() : 0) != np)
      throw ValidationError("tracker: carried override rows do not match state tracks");
  } else if (np > 0) {
    Eigen::MatrixXd block(np, params_.d);
    for (Eigen::Index j = 0; j < np; ++j) {
      const auto& qf = state.tracks[static_cast<std::size_t>(j)].query_feature;
      if (static_cast<int>(qf.size()) != params_.d)
        throw ValidationError("tracker: stored query_feature width does not match d");
      for (int c = 0; c < params_.d; ++c) block(j, c) = qf[static_cast<std::size_t>(c)];
    }
    carried = Tensor::constant(std::move(block));
  }

  Encoded enc = encode_inputs(res.queries, smoothed, carried, box_override);
  res.tfeat = track_attention(enc.qfeat, enc.sfeat, context);
  res.decoded = decode_tracks(res.tfeat);

  // EMA base: the carried feature for persistent queries, the encoded
  // detection (its own query row) for births.
  const Eigen::Index nq = static_cast<Eigen::Index>(res.queries.size());
  Tensor base;
  if (np == 0)
    base = enc.qfeat;
  else if (np == nq)
    base = carried;
  else
    base = nn::concat_rows({carried, nn::slice_rows(enc.qfeat, np, nq - np)});
  res.carried_out = nn::add(nn::scale(base, kCarryDecay), nn::scale(res.tfeat, 1.0 - kCarryDecay));

  auto [emitted, next] =
      lifecycle_update(res.decoded, res.queries, state, res.carried_out, &res.survivors);
  res.emitted = std::move(emitted);
  res.state = std::move(next);
  return res;
}

}  // namespace lmot::model
